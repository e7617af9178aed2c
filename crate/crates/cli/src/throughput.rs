//! Wall-clock scaling of compress, merge and recover.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use lhc_core::compressed::{compress, IndexChoice};
use lhc_core::{gen_synthetic, CompressedGradient, GradientVector, SketchConfig, SparsityProfile};
use lhc_recovery::curve::config_for_fraction;
use lhc_recovery::recover;

use crate::CliError;

pub const THROUGHPUT_SCHEMA: &str = "homagg-throughput/1";

#[derive(Debug, Clone)]
pub struct ThroughputSpec {
    pub sizes: Vec<usize>,
    pub sparsity: f64,
    /// Sketch cells as a fraction of the parameter count.
    pub fraction: f64,
    pub batch_width: u32,
    pub seed: u64,
    pub reps: usize,
    pub index: IndexChoice,
}

#[derive(Debug, Clone, Copy)]
pub struct ThroughputRow {
    pub n: usize,
    pub compress: Duration,
    pub merge: Duration,
    pub recover: Duration,
    pub recovery_rate: f64,
}

/// One size, ready to time.
struct Case {
    g: GradientVector,
    cfg: SketchConfig,
    cg: CompressedGradient,
    best: ThroughputRow,
}

fn prepare(spec: &ThroughputSpec, n: usize) -> Result<Case, CliError> {
    let g = gen_synthetic(n, &SparsityProfile::new(spec.sparsity, spec.seed))?;
    let template = SketchConfig::new(3, spec.batch_width, spec.seed)?;
    let cfg = config_for_fraction(&template, n as u64, spec.fraction)?;
    let cg = compress(&g, &cfg, spec.index)?;
    let best = ThroughputRow {
        n,
        compress: Duration::MAX,
        merge: Duration::MAX,
        recover: Duration::MAX,
        recovery_rate: 0.0,
    };
    Ok(Case { g, cfg, cg, best })
}

fn time_once(spec: &ThroughputSpec, case: &mut Case) -> Result<(), CliError> {
    let t = Instant::now();
    let cg = compress(&case.g, &case.cfg, spec.index)?;
    case.best.compress = case.best.compress.min(t.elapsed());

    let t = Instant::now();
    let merged = cg.merge(&case.cg)?;
    case.best.merge = case.best.merge.min(t.elapsed());
    drop(merged);

    let t = Instant::now();
    let (_, stats) = recover(&cg)?;
    case.best.recover = case.best.recover.min(t.elapsed());
    case.best.recovery_rate = stats.recovery_rate;
    Ok(())
}

/// Fastest of `spec.reps` runs per phase for one size.
pub fn measure(spec: &ThroughputSpec, n: usize) -> Result<ThroughputRow, CliError> {
    let mut case = prepare(spec, n)?;
    for _ in 0..spec.reps.max(1) {
        time_once(spec, &mut case)?;
    }
    Ok(case.best)
}

/// Repetitions cycle through the sizes so a slow spell on a shared machine
/// is spread over every size instead of inflating one of them.
pub fn run_throughput(spec: &ThroughputSpec) -> Result<Vec<ThroughputRow>, CliError> {
    if spec.sizes.is_empty() || spec.sizes.windows(2).any(|w| w[0] >= w[1]) || spec.sizes[0] == 0 {
        return Err(CliError::Validation("--sizes must be positive and strictly ascending".into()));
    }
    let mut cases = spec.sizes.iter().map(|&n| prepare(spec, n)).collect::<Result<Vec<_>, _>>()?;
    for _ in 0..spec.reps.max(1) {
        for case in &mut cases {
            time_once(spec, case)?;
        }
    }
    Ok(cases.into_iter().map(|c| c.best).collect())
}

/// `time(next) / time(prev)` per phase.
pub fn ratios(prev: &ThroughputRow, next: &ThroughputRow) -> [f64; 3] {
    let r = |a: Duration, b: Duration| b.as_secs_f64() / a.as_secs_f64();
    [r(prev.compress, next.compress), r(prev.merge, next.merge), r(prev.recover, next.recover)]
}

pub fn write_csv(w: &mut dyn Write, spec: &ThroughputSpec, rows: &[ThroughputRow]) -> io::Result<()> {
    writeln!(
        w,
        "# {THROUGHPUT_SCHEMA} sparsity={} fraction={} batch_width={} reps={} seed={}",
        spec.sparsity, spec.fraction, spec.batch_width, spec.reps, spec.seed
    )?;
    writeln!(w, "n,compress_s,merge_s,recover_s,recovery_rate,compress_ratio,merge_ratio,recover_ratio")?;
    for (i, r) in rows.iter().enumerate() {
        write!(
            w,
            "{},{:.6},{:.6},{:.6},{}",
            r.n,
            r.compress.as_secs_f64(),
            r.merge.as_secs_f64(),
            r.recover.as_secs_f64(),
            r.recovery_rate
        )?;
        match i.checked_sub(1) {
            Some(p) => {
                let [c, m, d] = ratios(&rows[p], r);
                writeln!(w, ",{c:.3},{m:.3},{d:.3}")?;
            }
            None => writeln!(w, ",,,")?,
        }
    }
    Ok(())
}
