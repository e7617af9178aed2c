use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sparsity {0} is outside [0, 1]")]
    InvalidSparsity(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: u64, right: u64 },
    #[error("non-finite value at position {0}")]
    NonFinite(u64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("incompatible operands: {0}")]
    Incompatible(String),
    #[error("position {position} out of range for length {len}")]
    OutOfRange { position: u64, len: u64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("malformed payload: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
