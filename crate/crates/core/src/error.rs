use thiserror::Error;

/// Errors raised by samplers, schemes and the experiment harness.
#[derive(Debug, Error)]
pub enum SieveError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("spec parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SieveError>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(SieveError::Parameter(msg.into()))
}
