use thiserror::Error;

/// Errors shared across the numerics, statistics, loss, and training layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("cannot normalize a zero vector")]
    ZeroNorm,

    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,

    #[error("matrix is not positive semidefinite within tolerance")]
    NotPositiveSemidefinite,

    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("encoder architecture mismatch: {0}")]
    ArchitectureMismatch(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training aborted at epoch {epoch}, step {step}: {detail}")]
    TrainingAborted {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
