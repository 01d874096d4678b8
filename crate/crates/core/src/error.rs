use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The CLI maps these onto process exit codes, so the variants stay coarse.
#[derive(Debug, Error)]
pub enum UrnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("condition violation: {0}")]
    ConditionViolation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("internal consistency: {0}")]
    Internal(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, UrnError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(UrnError::InvalidArgument(msg.into()))
}
