//! Recovery side of lossless homomorphic gradient compression: the peeling
//! decoder, its statistics, recovery-rate sweeps, and the worker-side
//! AllReduce drivers.

pub mod allreduce;
pub mod curve;
pub mod error;
pub mod peel;
pub mod recover;
mod table;

pub use allreduce::{allreduce_inmemory, merge_all};
#[cfg(feature = "net")]
pub use allreduce::{worker_round, WorkerError};
pub use error::RecoveryError;
pub use peel::{peel, PeelState, Peeled, Resolved};
pub use recover::{recover, recover_detailed, Recovery, RecoveryStats};
