use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or distribution field violates one of its invariants.
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// A computation received data it cannot work with (empty samples,
    /// mismatched lengths, out-of-domain arguments, malformed input files).
    #[error("data error: {0}")]
    Data(String),

    /// A model transition broke an internal invariant; indicates a bug.
    #[error("internal logic error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
