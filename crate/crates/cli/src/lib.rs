//! Library side of the `homagg` binary. Each subcommand is a plain function
//! so tests can drive it without spawning processes.

pub mod args;
pub mod codec;
pub mod error;
pub mod net;
pub mod sweep;
pub mod theory;
pub mod throughput;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use lhc_core::compressed::IndexChoice;
use lhc_core::{gen_synthetic, theory as th, GradientVector, SparsityProfile, ValueLaw, ZeroLayout};

pub use args::{Cli, Command};
pub use error::CliError;

use args::{DataArgs, Global, IndexArg, ValuesArg};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if g.batch_width == 0 {
        return Err(CliError::Validation("--batch-width must be at least 1".into()));
    }
    if !(g.gamma > 0.0 && g.gamma.is_finite()) {
        return Err(CliError::Validation(format!("--gamma must be positive, got {}", g.gamma)));
    }
    match &cli.command {
        Command::Sweep { data, fractions, seeds, block_rows, threads } => {
            let spec = sweep::SweepSpec::from_args(g, data, fractions.clone(), *seeds, *block_rows)?;
            let rows = sweep::run_sweep(&spec, *threads)?;
            with_output(g.out.as_deref(), |w| sweep::write_csv(w, &spec, &rows))
        }
        Command::Theory { bit_widths, lambdas, nonzeros } => {
            let rows = theory::theory_grid(*nonzeros, bit_widths, lambdas, g.gamma)?;
            with_output(g.out.as_deref(), |w| theory::write_csv(w, *nonzeros, g.gamma, &rows))
        }
        Command::Throughput { sizes, sparsity, fraction, reps } => {
            let spec = throughput::ThroughputSpec {
                sizes: sizes.clone(),
                sparsity: *sparsity,
                fraction: *fraction,
                batch_width: g.batch_width,
                seed: g.seed,
                reps: *reps,
                index: index_choice(g, None)?,
            };
            let rows = throughput::run_throughput(&spec)?;
            with_output(g.out.as_deref(), |w| throughput::write_csv(w, &spec, &rows))
        }
        Command::Gen { data } => codec::cmd_gen(g, data),
        Command::Compress { input, size } => codec::cmd_compress(g, input, size),
        Command::Recover { input } => codec::cmd_recover(g, input),
        Command::Allreduce { inputs, size } => codec::cmd_allreduce(g, inputs, size),
        Command::Serve { bind, workers, timeout, rounds } => net::cmd_serve(*bind, *workers, *timeout, *rounds),
        Command::Worker { server, id, input, round, expected_nonzeros, timeout, size } => {
            net::cmd_worker(g, net::WorkerArgs {
                server: *server,
                id: *id,
                input,
                round: *round,
                expected_nonzeros: *expected_nonzeros,
                timeout: *timeout,
                size,
            })
        }
    }
}

/// Runs `f` against the `--out` file, or stdout.
pub(crate) fn with_output(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub(crate) fn profile(data: &DataArgs, seed: u64) -> Result<SparsityProfile, CliError> {
    let mut p = match (&data.preset, data.sparsity) {
        (Some(name), _) => SparsityProfile::preset(name, seed).ok_or_else(|| {
            CliError::Validation(format!("unknown preset {name:?}; expected one of {:?}", lhc_core::gradient::PRESETS))
        })?,
        (None, Some(s)) => SparsityProfile::new(s, seed),
        (None, None) => return Err(CliError::Validation("give --preset or --sparsity".into())),
    };
    p = p.with_values(match data.values {
        ValuesArg::Normal => ValueLaw::StandardNormal,
        ValuesArg::Uniform => ValueLaw::Uniform,
        ValuesArg::Int => ValueLaw::Integer { bits: data.bits },
    });
    if let Some(run) = data.run {
        if run == 0 {
            return Err(CliError::Validation("--run must be at least 1".into()));
        }
        p = p.with_layout(ZeroLayout::Clustered { run });
    }
    Ok(p)
}

pub(crate) fn synthetic(data: &DataArgs, seed: u64) -> Result<GradientVector, CliError> {
    if data.n == 0 {
        return Err(CliError::Validation("--n must be at least 1".into()));
    }
    Ok(gen_synthetic(data.n, &profile(data, seed)?)?)
}

/// Index choice from the global flags. `data` supplies the non-zero ratio
/// when the Bloom rate must be derived.
pub(crate) fn index_choice(g: &Global, data: Option<(u64, u64)>) -> Result<IndexChoice, CliError> {
    if let Some(e) = g.epsilon {
        if !(e > 0.0 && e <= 1.0) {
            return Err(CliError::Validation(format!("--epsilon must be in (0, 1], got {e}")));
        }
    }
    Ok(match g.index {
        IndexArg::Bitmap => IndexChoice::Bitmap,
        IndexArg::Auto => IndexChoice::Auto { expected_nonzeros: None },
        IndexArg::Bloom => {
            let epsilon = match (g.epsilon, data) {
                (Some(e), _) => e,
                (None, Some((n_params, nonzeros))) if nonzeros > 0 && nonzeros < n_params => {
                    let lambda = (n_params - nonzeros) as f64 / nonzeros as f64;
                    th::optimal_epsilon(lhc_core::compressed::VALUE_BITS, lambda, g.gamma)
                }
                (None, Some(_)) => 1.0,
                (None, None) => return Err(CliError::Validation("--index bloom needs --epsilon here".into())),
            };
            IndexChoice::Bloom { epsilon, expected_nonzeros: None }
        }
    })
}
