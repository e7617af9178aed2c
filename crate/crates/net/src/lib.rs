//! Parameter-server style aggregation over framed TCP.
//!
//! The aggregator only ever merges: it sums sketches and ORs indexes. It has
//! no dependency on the recovery crate, so it cannot decode a gradient.

pub mod client;
pub mod error;
pub mod server;
pub mod state;

pub use client::submit;
pub use error::NetError;
pub use server::{Server, ServerConfig};
pub use state::{AggregatorState, Submission};

use std::time::Duration;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Largest frame payload either side accepts.
pub const DEFAULT_MAX_PAYLOAD: u32 = 1 << 30;
