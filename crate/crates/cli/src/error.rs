use ni_core::error::NiError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid document: {0}")]
    Invalid(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] NiError),
}
