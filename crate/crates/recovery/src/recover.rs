//! Decoding a (possibly aggregated) compressed gradient.

use lhc_core::sketch::map_row;
use lhc_core::{CompressedGradient, GradientVector};

use crate::error::RecoveryError;
use crate::peel::{peel, Peeled};
use crate::table::table;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryStats {
    /// Fraction of claimed positions resolved exactly by peeling.
    pub recovery_rate: f64,
    pub peel_iterations: u32,
    /// Positions the index claims as non-zero.
    pub candidates: u64,
    /// Claimed positions filled in by the median estimate instead.
    pub fallback_count: u64,
}

impl RecoveryStats {
    pub fn is_lossless(&self) -> bool {
        self.fallback_count == 0
    }
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub gradient: GradientVector,
    pub stats: RecoveryStats,
    pub peeled: Peeled,
}

/// Peels the sketch, then estimates whatever is left.
///
/// Unclaimed positions are exactly zero. Peeled positions carry their exact
/// value up to float rounding of the sums. Remaining candidates get the
/// median of their three signed reads from the residual sketch, i.e. after
/// every peeled contribution has been subtracted.
pub fn recover(cg: &CompressedGradient) -> Result<(GradientVector, RecoveryStats), RecoveryError> {
    let r = recover_detailed(cg)?;
    Ok((r.gradient, r.stats))
}

pub fn recover_detailed(cg: &CompressedGradient) -> Result<Recovery, RecoveryError> {
    let n = usize::try_from(cg.n_params())
        .map_err(|_| lhc_core::Error::InvalidConfig("parameter count exceeds address space".into()))?;
    let peeled = peel(cg.sketch(), cg.index())?;
    let mut values = table(0f32, n);
    for r in &peeled.resolved {
        values[r.position as usize] = r.value as f32;
    }

    let cfg = cg.sketch().config();
    let c = cfg.batch_width;
    let residual = peeled.state.residual();
    for &p in &peeled.unresolved {
        let m = map_row(p / c as u64, cfg);
        let t = (p % c as u64) as u32;
        let mut reads = m.0.map(|s| s.sign() as f64 * residual[s.cell(t, c)]);
        reads.sort_by(f64::total_cmp);
        values[p as usize] = reads[1] as f32;
    }

    let fallback_count = peeled.unresolved.len() as u64;
    let recovery_rate = if peeled.candidates == 0 {
        1.0
    } else {
        peeled.resolved.len() as f64 / peeled.candidates as f64
    };
    let stats = RecoveryStats {
        recovery_rate,
        peel_iterations: peeled.iterations,
        candidates: peeled.candidates,
        fallback_count,
    };
    Ok(Recovery { gradient: GradientVector::new(values)?, stats, peeled })
}
