//! File-based commands: gen, compress, recover, allreduce.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use lhc_core::gradient::{read_gradient, write_gradient};
use lhc_core::sketch::rows_for_candidates;
use lhc_core::{compress, CompressedGradient, DType, GradientVector, SketchConfig};
use lhc_recovery::curve::config_for_fraction;
use lhc_recovery::{merge_all, recover, RecoveryStats};

use crate::args::{DataArgs, Global, SizeArgs};
use crate::{index_choice, synthetic, CliError};

fn require_out(g: &Global) -> Result<&Path, CliError> {
    g.out.as_deref().ok_or_else(|| CliError::Validation("this command needs --out FILE".into()))
}

pub fn load_gradient(path: &Path) -> Result<(GradientVector, DType), CliError> {
    let f = File::open(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(read_gradient(BufReader::new(f))?)
}

pub fn save_gradient(path: &Path, g: &GradientVector, dtype: DType) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_gradient(&mut w, g, dtype)?;
    w.flush()?;
    Ok(())
}

/// Integer files stay integer only when every value came back exactly.
fn output_dtype(dtype: DType, stats: &RecoveryStats) -> DType {
    if stats.is_lossless() {
        dtype
    } else {
        DType::Float32
    }
}

pub(crate) fn report(stats: &RecoveryStats) {
    eprintln!(
        "recovery_rate={} iterations={} candidates={} fallback={}",
        stats.recovery_rate, stats.peel_iterations, stats.candidates, stats.fallback_count
    );
}

/// Sketch layout from the size flags. Without `--rows` or `--fraction` the
/// sketch is sized from `candidates` (required in that case).
pub(crate) fn sketch_config(
    g: &Global,
    size: &SizeArgs,
    n_params: u64,
    candidates: Option<u64>,
) -> Result<SketchConfig, CliError> {
    let mut template = SketchConfig::new(3, g.batch_width, g.seed)?.with_gamma(g.gamma);
    template.block_rows = size.block_rows;
    if let Some(rows) = size.rows {
        let cfg = SketchConfig { rows, ..template };
        cfg.validate()?;
        return Ok(cfg);
    }
    if let Some(f) = size.fraction {
        return Ok(config_for_fraction(&template, n_params, f)?);
    }
    let Some(candidates) = candidates else {
        return Err(CliError::Validation("give --rows or --fraction so every worker agrees on the layout".into()));
    };
    let cfg = match size.block_rows {
        Some(block) => SketchConfig::blocked(candidates, g.batch_width, g.seed, block, size.overprovision)?,
        None => SketchConfig::new(rows_for_candidates(candidates, g.batch_width, g.gamma), g.batch_width, g.seed)?,
    };
    Ok(cfg.with_gamma(g.gamma))
}

pub fn cmd_gen(g: &Global, data: &DataArgs) -> Result<(), CliError> {
    let out = require_out(g)?;
    let grad = synthetic(data, g.seed)?;
    let dtype = match data.values {
        crate::args::ValuesArg::Int => DType::Int32,
        _ => DType::Float32,
    };
    save_gradient(out, &grad, dtype)
}

pub fn cmd_compress(g: &Global, input: &Path, size: &SizeArgs) -> Result<(), CliError> {
    let out = require_out(g)?;
    let (grad, dtype) = load_gradient(input)?;
    let nz = grad.nonzero_count();
    let cfg = sketch_config(g, size, grad.len(), Some(nz))?;
    let choice = index_choice(g, Some((grad.len(), nz)))?;
    let cg = compress(&grad, &cfg, choice)?.with_dtype(dtype);
    let mut w = BufWriter::new(File::create(out)?);
    cg.write_to(&mut w)?;
    w.flush()?;
    eprintln!(
        "rows={} batch_width={} index={:?} bytes={} ({:.4} of original)",
        cfg.rows,
        cfg.batch_width,
        cg.index().kind(),
        cg.encoded_len(),
        cg.payload_bits() as f64 / (32.0 * grad.len() as f64)
    );
    Ok(())
}

pub fn load_compressed(path: &Path) -> Result<CompressedGradient, CliError> {
    let f = File::open(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(CompressedGradient::read_from(BufReader::new(f))?)
}

pub fn cmd_recover(g: &Global, input: &Path) -> Result<(), CliError> {
    let cg = load_compressed(input)?;
    let (grad, stats) = recover(&cg)?;
    report(&stats);
    if let Some(out) = &g.out {
        save_gradient(out, &grad, output_dtype(cg.dtype(), &stats))?;
    }
    Ok(())
}

pub fn cmd_allreduce(g: &Global, inputs: &[PathBuf], size: &SizeArgs) -> Result<(), CliError> {
    let mut grads = Vec::with_capacity(inputs.len());
    let mut dtype = DType::Int32;
    for p in inputs {
        let (grad, d) = load_gradient(p)?;
        if d == DType::Float32 {
            dtype = DType::Float32;
        }
        grads.push(grad);
    }
    let n = grads[0].len();
    if let Some(bad) = grads.iter().find(|x| x.len() != n) {
        return Err(CliError::Validation(format!("inputs differ in length: {n} vs {}", bad.len())));
    }
    let union = (0..n as usize).filter(|&i| grads.iter().any(|x| x.as_slice()[i] != 0.0)).count() as u64;
    let cfg = sketch_config(g, size, n, Some(union))?;
    let choice = index_choice(g, Some((n, union)))?;
    let merged = merge_all(&grads, &cfg, choice)?.with_dtype(dtype);
    let (sum, stats) = recover(&merged)?;
    report(&stats);
    if let Some(out) = &g.out {
        save_gradient(out, &sum, output_dtype(dtype, &stats))?;
    }
    Ok(())
}
