//! `serve` and `worker`.

use std::net::SocketAddr;
use std::path::Path;
use std::thread;
use std::time::Duration;

use lhc_core::compressed::IndexChoice;
use lhc_core::DType;
use lhc_net::{Server, ServerConfig};
use lhc_recovery::worker_round;

use crate::args::{Global, IndexArg, SizeArgs};
use crate::codec::{load_gradient, report, save_gradient, sketch_config};
use crate::{index_choice, CliError};

fn seconds(s: f64) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(s)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| CliError::Validation(format!("timeout must be a positive number of seconds, got {s}")))
}

pub fn cmd_serve(bind: SocketAddr, workers: u16, timeout: f64, rounds: Option<u64>) -> Result<(), CliError> {
    if workers == 0 {
        return Err(CliError::Validation("--workers must be at least 1".into()));
    }
    let server = Server::bind(bind, ServerConfig::new(workers).with_timeout(seconds(timeout)?))?;
    eprintln!("listening on {} for rounds of {workers}", server.local_addr());
    match rounds {
        None => server.wait(),
        Some(limit) => {
            while server.completed_rounds() < limit {
                thread::sleep(Duration::from_millis(10));
            }
            // Let the last RESULT frames drain before closing.
            thread::sleep(Duration::from_millis(100));
            server.shutdown();
        }
    }
    Ok(())
}

pub struct WorkerArgs<'a> {
    pub server: SocketAddr,
    pub id: u16,
    pub input: &'a Path,
    pub round: u64,
    pub expected_nonzeros: Option<u64>,
    pub timeout: f64,
    pub size: &'a SizeArgs,
}

pub fn cmd_worker(g: &Global, a: WorkerArgs<'_>) -> Result<(), CliError> {
    let (grad, dtype) = load_gradient(a.input)?;
    // Layout and index shape must agree across workers, so nothing may be
    // sized from the local data.
    let cfg = sketch_config(g, a.size, grad.len(), None)?;
    let choice = match g.index {
        IndexArg::Bitmap => IndexChoice::Bitmap,
        IndexArg::Bloom | IndexArg::Auto => {
            let Some(expected) = a.expected_nonzeros else {
                return Err(CliError::Validation("--index bloom/auto needs --expected-nonzeros for a shared filter".into()));
            };
            match index_choice(g, Some((grad.len(), expected)))? {
                IndexChoice::Bloom { epsilon, .. } => IndexChoice::Bloom { epsilon, expected_nonzeros: Some(expected) },
                IndexChoice::Auto { .. } => {
                    IndexChoice::Auto { expected_nonzeros: Some(expected) }.resolve(grad.len(), expected, g.gamma)
                }
                IndexChoice::Bitmap => IndexChoice::Bitmap,
            }
        }
    };
    let (sum, stats) = worker_round(a.server, a.id, a.round, &grad, &cfg, choice, seconds(a.timeout)?)?;
    report(&stats);
    if let Some(out) = &g.out {
        let dtype = if stats.is_lossless() { dtype } else { DType::Float32 };
        save_gradient(out, &sum, dtype)?;
    }
    Ok(())
}
