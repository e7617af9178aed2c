//! Lossless homomorphic compression of sparse gradients.
//!
//! A gradient is compressed into a signed Count Sketch plus a non-zero index.
//! Compressed forms from many workers merge by summing sketches and OR-ing
//! indexes, so an aggregator can combine them without decompressing. The
//! decoder lives in `lhc-recovery`; nothing in this crate reconstructs values
//! beyond the plain median estimate.

pub mod compressed;
pub mod error;
pub mod frame;
pub mod gradient;
mod hash;
pub mod index;
pub mod sketch;
pub mod theory;

pub use compressed::{compress, CompressedGradient, Header, IndexChoice};
pub use error::{Error, Result};
pub use gradient::{
    average_relative_error, gen_synthetic, sparsity, DType, ErrorSummary, GradientVector, SparsityProfile,
    ValueLaw, ZeroLayout,
};
pub use index::{IndexKind, NzIndex};
pub use sketch::{map_row, CountSketch, RowMapping, SketchConfig, Slot};
