//! Recovery rate, error and peel rounds across a grid of sketch sizes.

use std::io::{self, Write};

use lhc_core::compressed::IndexChoice;
use lhc_core::{gen_synthetic, SketchConfig, SparsityProfile};
use lhc_recovery::curve::{curve_point, write_point_csv, CurvePoint, CURVE_CSV_HEADER};
use rayon::prelude::*;

use crate::args::{DataArgs, Global};
use crate::{index_choice, profile, CliError};

pub const SWEEP_SCHEMA: &str = "homagg-sweep/1";

/// 2% to 200%, dense around the transition.
pub const DEFAULT_FRACTIONS: [f64; 22] = [
    0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.82, 0.84, 0.85, 0.86, 0.87, 0.88, 0.9, 1.0, 1.2, 1.5,
    2.0,
];

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub n_params: usize,
    /// Profile for the first seed; seed `k` uses `base_seed + k`.
    pub profile: SparsityProfile,
    pub fractions: Vec<f64>,
    pub seeds: u64,
    pub base_seed: u64,
    pub index: IndexChoice,
    pub batch_width: u32,
    pub block_rows: Option<u32>,
    pub gamma: f64,
}

impl SweepSpec {
    pub fn from_args(
        g: &Global,
        data: &DataArgs,
        fractions: Option<Vec<f64>>,
        seeds: u64,
        block_rows: Option<u32>,
    ) -> Result<Self, CliError> {
        let p = profile(data, g.seed)?;
        let expected_nz = ((1.0 - p.sparsity) * data.n as f64).round() as u64;
        let spec = SweepSpec {
            n_params: data.n,
            profile: p,
            fractions: fractions.unwrap_or_else(|| DEFAULT_FRACTIONS.to_vec()),
            seeds,
            base_seed: g.seed,
            index: index_choice(g, Some((data.n as u64, expected_nz)))?,
            batch_width: g.batch_width,
            block_rows,
            gamma: g.gamma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_params == 0 || self.seeds == 0 || self.fractions.is_empty() {
            return Err(CliError::Validation("sweep needs n >= 1, seeds >= 1 and at least one fraction".into()));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 2.0)) {
            return Err(CliError::Validation(format!("fraction {f} outside (0, 2]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub seed: u64,
    pub point: CurvePoint,
}

/// Runs every (seed, fraction) point. Rows come back ordered by fraction,
/// then seed, whatever the thread count.
pub fn run_sweep(spec: &SweepSpec, threads: Option<usize>) -> Result<Vec<SweepRow>, CliError> {
    spec.validate()?;
    let job = || -> Result<Vec<Vec<SweepRow>>, CliError> {
        (0..spec.seeds)
            .into_par_iter()
            .map(|k| {
                let seed = spec.base_seed.wrapping_add(k);
                let p = SparsityProfile { seed, ..spec.profile };
                let g = gen_synthetic(spec.n_params, &p)?;
                let mut template = SketchConfig::new(3, spec.batch_width, seed)?.with_gamma(spec.gamma);
                template.block_rows = spec.block_rows;
                spec.fractions
                    .iter()
                    .map(|&f| Ok(SweepRow { seed, point: curve_point(&g, f, &template, spec.index)? }))
                    .collect()
            })
            .collect()
    };
    let per_seed = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Validation(e.to_string()))?
            .install(job)?,
        None => job()?,
    };
    let mut rows = Vec::with_capacity(per_seed.len() * spec.fractions.len());
    for fi in 0..spec.fractions.len() {
        rows.extend(per_seed.iter().map(|s| s[fi].clone()));
    }
    Ok(rows)
}

pub fn write_csv(w: &mut dyn Write, spec: &SweepSpec, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(
        w,
        "# {SWEEP_SCHEMA} n={} sparsity={} batch_width={} index={:?} gamma={} seed={} seeds={}",
        spec.n_params, spec.profile.sparsity, spec.batch_width, spec.index, spec.gamma, spec.base_seed, spec.seeds
    )?;
    writeln!(w, "{CURVE_CSV_HEADER}")?;
    for r in rows {
        write_point_csv(&mut *w, r.seed, &r.point)?;
    }
    Ok(())
}

/// Smallest fraction at which the mean recovery rate reaches one half,
/// linearly interpolated between grid points.
pub fn transition_midpoint(rows: &[SweepRow]) -> Option<f64> {
    let mut fractions: Vec<f64> = rows.iter().map(|r| r.point.fraction).collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    let mean = |f: f64| {
        let pts: Vec<f64> = rows.iter().filter(|r| r.point.fraction == f).map(|r| r.point.stats.recovery_rate).collect();
        pts.iter().sum::<f64>() / pts.len() as f64
    };
    let curve: Vec<(f64, f64)> = fractions.iter().map(|&f| (f, mean(f))).collect();
    curve.windows(2).find_map(|w| {
        let ((f0, r0), (f1, r1)) = (w[0], w[1]);
        (r0 < 0.5 && r1 >= 0.5).then(|| f0 + (0.5 - r0) / (r1 - r0) * (f1 - f0))
    })
}
