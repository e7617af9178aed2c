use lhc_net::NetError;
use lhc_recovery::{RecoveryError, WorkerError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or malformed input files.
    #[error("{0}")]
    Validation(String),
    /// The aggregator rejected us, timed out, or spoke nonsense.
    #[error("{0}")]
    Protocol(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Protocol(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<lhc_core::Error> for CliError {
    fn from(e: lhc_core::Error) -> Self {
        match e {
            lhc_core::Error::Io(io) => CliError::Io(io),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<RecoveryError> for CliError {
    fn from(e: RecoveryError) -> Self {
        match e {
            RecoveryError::Core(c) => c.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        CliError::Protocol(e.to_string())
    }
}

impl From<WorkerError> for CliError {
    fn from(e: WorkerError) -> Self {
        match e {
            WorkerError::Net(n) => n.into(),
            WorkerError::Recovery(r) => r.into(),
        }
    }
}
