use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed drama markup.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An annotation record violates a corpus invariant.
    #[error("invalid annotation ({record}): {message}")]
    Validation { record: String, message: String },

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A model, vector, or fold file is malformed.
    #[error("bad file format: {0}")]
    Format(String),

    /// Inputs do not satisfy an operation's precondition.
    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn validation(record: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            record: record.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
