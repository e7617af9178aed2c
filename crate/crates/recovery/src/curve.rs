//! Recovery quality as a function of compressed size.

use std::io::Write;

use lhc_core::compressed::{compress, IndexChoice};
use lhc_core::sketch::{round_to_blocks, rows_for_fraction};
use lhc_core::{average_relative_error, ErrorSummary, GradientVector, SketchConfig};

use crate::error::RecoveryError;
use crate::recover::{recover, RecoveryStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Requested sketch size as a fraction of the original data.
    pub fraction: f64,
    pub rows: u32,
    /// Actual sketch size / original size, after rounding to whole rows.
    pub sketch_fraction: f64,
    /// (sketch + index) / original size.
    pub total_fraction: f64,
    pub error: ErrorSummary,
    pub stats: RecoveryStats,
}

/// Sketch config from `template` with enough rows for `fraction * N` cells.
pub fn config_for_fraction(template: &SketchConfig, n_params: u64, fraction: f64) -> Result<SketchConfig, RecoveryError> {
    if !(fraction > 0.0 && fraction <= 2.0) {
        return Err(lhc_core::Error::InvalidConfig(format!("fraction {fraction} outside (0, 2]")).into());
    }
    let mut rows = rows_for_fraction(n_params, template.batch_width, fraction);
    if let Some(block) = template.block_rows {
        rows = round_to_blocks(rows, block);
    }
    Ok(SketchConfig { rows, ..*template })
}

pub fn curve_point(
    g: &GradientVector,
    fraction: f64,
    template: &SketchConfig,
    choice: IndexChoice,
) -> Result<CurvePoint, RecoveryError> {
    let cfg = config_for_fraction(template, g.len(), fraction)?;
    let cg = compress(g, &cfg, choice)?;
    let (back, stats) = recover(&cg)?;
    let n = g.len() as f64;
    Ok(CurvePoint {
        fraction,
        rows: cfg.rows,
        sketch_fraction: cfg.cells() as f64 / n,
        total_fraction: cg.payload_bits() as f64 / (32.0 * n),
        error: average_relative_error(g, &back)?,
        stats,
    })
}

pub fn recovery_rate_curve(
    g: &GradientVector,
    fractions: &[f64],
    template: &SketchConfig,
    choice: IndexChoice,
) -> Result<Vec<CurvePoint>, RecoveryError> {
    fractions.iter().map(|&f| curve_point(g, f, template, choice)).collect()
}

pub const CURVE_CSV_HEADER: &str = "fraction,seed,rows,sketch_fraction,total_fraction,avg_rel_error,zero_abs_error,recovery_rate,iterations,candidates,fallback";

pub fn write_point_csv<W: Write>(mut w: W, seed: u64, p: &CurvePoint) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{},{},{:.6},{:.6},{:.6e},{:.6e},{:.6},{},{},{}",
        p.fraction,
        seed,
        p.rows,
        p.sketch_fraction,
        p.total_fraction,
        p.error.mean_relative,
        p.error.mean_abs_at_zeros,
        p.stats.recovery_rate,
        p.stats.peel_iterations,
        p.stats.candidates,
        p.stats.fallback_count
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use lhc_core::{gen_synthetic, SparsityProfile};

    #[test]
    fn rejects_fractions_outside_range() {
        let t = SketchConfig::new(3, 16, 0).unwrap();
        assert!(config_for_fraction(&t, 100, 0.0).is_err());
        assert!(config_for_fraction(&t, 100, 2.5).is_err());
        assert!(config_for_fraction(&t, 100, 2.0).is_ok());
    }

    #[test]
    fn generous_and_starved_sketches() {
        let g = gen_synthetic(1 << 16, &SparsityProfile::new(0.304, 5)).unwrap();
        let t = SketchConfig::new(3, 1024, 9).unwrap();
        let pts = recovery_rate_curve(&g, &[0.02, 2.0], &t, IndexChoice::Bitmap).unwrap();
        assert!(pts[0].stats.recovery_rate < 1.0);
        assert!(pts[0].error.mean_relative > 0.0);
        assert_eq!(pts[1].stats.recovery_rate, 1.0);
        assert!((pts[1].sketch_fraction - 2.0).abs() < 1e-9);
        assert!(pts[1].total_fraction > pts[1].sketch_fraction);
    }
}
