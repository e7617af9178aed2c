use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error(transparent)]
    Core(#[from] lhc_core::Error),
    /// A singleton cell names a position that cannot live there. Indicates a
    /// hash or serialization mismatch between compressor and decoder.
    #[error("inconsistent peel state: cell {cell} names position {position}")]
    Inconsistent { cell: usize, position: u64 },
}
