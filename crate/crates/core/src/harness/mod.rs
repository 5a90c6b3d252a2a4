//! Experiment configuration, evaluation protocols, response surfaces and the
//! command-line front end.

pub mod cli;
pub mod config;
pub mod env;
pub mod eval;
pub mod surface;
pub mod training;

use qctrl_dqn::DqnError;
use thiserror::Error;

use crate::error::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dqn(#[from] DqnError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration errors, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Sim(SimError::Config(_)) => 2,
            _ => 3,
        }
    }
}
