use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QviError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A parameter failed validation. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("numeric failure: {0}")]
    NumericFailure(String),
}

impl QviError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        QviError::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, QviError>;
