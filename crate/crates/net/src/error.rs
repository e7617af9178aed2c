use lhc_core::frame::NackReason;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Core(#[from] lhc_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("aggregator rejected submission: {0}")]
    Nack(NackReason),
    #[error("timed out waiting for the aggregate")]
    Timeout,
    #[error("protocol error: {0}")]
    Protocol(String),
}
