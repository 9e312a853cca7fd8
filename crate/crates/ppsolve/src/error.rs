//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix (rank {rank})")]
    SingularMatrix { rank: usize },

    #[error("policy mismatch: {0}")]
    PolicyMismatch(String),

    #[error("policy enumeration cap exceeded: {policies} policies > cap {cap}")]
    EnumerationCap { policies: u128, cap: u128 },

    #[error("operation not supported for {0} systems")]
    UnsupportedFlavor(&'static str),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
