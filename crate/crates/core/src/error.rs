use std::path::PathBuf;

use thiserror::Error;

use crate::domain::Stump;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Some stump in the generated class makes no mistakes on the data, so
    /// the class is not AdaBoost-natural and boosting stops at round one.
    #[error("perfect stump {0} classifies the whole dataset")]
    PerfectStump(Stump),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("exact cell census supports n <= 3 (got n = {0}); use the monte-carlo method")]
    ExactCellsUnsupported(usize),

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
