use thiserror::Error;

/// Failures of a CLI operation, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("integrity failure: {0}")]
    Integrity(String),
    #[error("audit failed")]
    AuditFailed,
    #[error("internal invariant breach: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Integrity(_) | CliError::Io(_) => 1,
            CliError::AuditFailed => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ballnn::Error> for CliError {
    fn from(e: ballnn::Error) -> Self {
        match e {
            ballnn::Error::Internal(_) => CliError::Internal(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
