use thiserror::Error;

/// Errors raised by the clustering library.
#[derive(Debug, Error)]
pub enum IcotError {
    /// Malformed input text (CSV, tree documents, LP files).
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Input is well-formed but violates a precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Caller asked for something that does not exist (unknown criterion, shape, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Exact machinery refused an instance that exceeds its size guard.
    #[error("instance too large: {what} is {actual}, limit is {limit}")]
    TooLarge {
        what: &'static str,
        actual: u64,
        limit: u64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IcotError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        IcotError::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, IcotError>;
