use thiserror::Error;

/// Errors produced by the simulator and learner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
