//! Simulators, controllers and evaluation tools for a quantum particle under
//! continuous position measurement in quadratic and quartic potentials.
//!
//! Units: ħ = 1, lengths in √(ħ/(m_c ω_c)), times in 1/ω_c.

pub mod banded;
pub mod control;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod osc;
pub mod qstate;
pub mod quartic;
pub mod reward;
pub mod sde;
pub mod stencil;

pub use error::{NumericError, SimError, StateError};

