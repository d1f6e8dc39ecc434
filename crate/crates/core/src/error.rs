//! Error type shared by every module of the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("empty epidemic: no malicious connection attempts on port {port}")]
    EmptyEpidemic { port: u16 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("draw budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("power iteration did not converge within {max_iter} iterations")]
    NoConvergence { max_iter: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
