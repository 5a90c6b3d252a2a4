//! Linear-quadratic synthesis and the classical feedback laws.

pub mod policy;
pub mod riccati;

pub use policy::{
    bang_bang, clip_discretize, damping_force, gaussian_approx_force, gaussian_target_momentum, trajectory_force,
    ControlPolicy, ExpansionOrder, ForceLevels, PolicyKind, QuarticSummary,
};
pub use riccati::{care_residual, dare_residual, riccati_ode, solve_care, solve_dare, LinearGain, RiccatiError, RiccatiProblem};
