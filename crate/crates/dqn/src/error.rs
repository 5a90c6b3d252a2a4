use thiserror::Error;

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("sum-tree draw {u} outside [0, {total})")]
    DrawOutOfRange { u: f64, total: f64 },
    #[error("non-finite loss at learning step {step}: {detail}")]
    Divergence { step: usize, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("environment: {0}")]
    Env(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
