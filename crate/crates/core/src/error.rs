use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("zero pivot at row {index} during factorization")]
    Singular { index: usize },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },
    #[error("{0}")]
    NoSolution(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("state is not normalized (norm² = {norm_sq})")]
    NotNormalized { norm_sq: f64 },
    #[error("state has amplitude {amplitude:.3e} near the grid border; energy is unreliable")]
    BorderAmplitude { amplitude: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation diverged at t = {time:.4}: {source}")]
    Diverged { time: f64, source: NumericError },
    #[error("force {force} is not one of the configured discrete levels")]
    ForceNotAllowed { force: f64 },
    #[error("force {force} outside bounds ±{bound}")]
    ForceOutOfBounds { force: f64, bound: f64 },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
