//! Compress, merge, recover: the AllReduce contract `S(X1) + ... + S(Xk) -> X1 + ... + Xk`.

use lhc_core::compressed::{compress, IndexChoice};
use lhc_core::{CompressedGradient, GradientVector, SketchConfig};

use crate::error::RecoveryError;
use crate::recover::{recover, RecoveryStats};

/// Compresses every gradient, folds them with `merge` in order, recovers once.
pub fn allreduce_inmemory(
    gradients: &[GradientVector],
    cfg: &SketchConfig,
    choice: IndexChoice,
) -> Result<(GradientVector, RecoveryStats), RecoveryError> {
    let merged = merge_all(gradients, cfg, choice)?;
    recover(&merged)
}

/// The merged compressed form of `gradients`.
pub fn merge_all(
    gradients: &[GradientVector],
    cfg: &SketchConfig,
    choice: IndexChoice,
) -> Result<CompressedGradient, RecoveryError> {
    let Some(first) = gradients.first() else {
        return Err(lhc_core::Error::InvalidConfig("allreduce needs at least one gradient".into()).into());
    };
    for g in &gradients[1..] {
        if g.len() != first.len() {
            return Err(lhc_core::Error::LengthMismatch { left: first.len(), right: g.len() }.into());
        }
    }
    // Every worker must build the same index shape, and the merged filter
    // holds the union of supports, so size it once from that union.
    let choice = match choice {
        IndexChoice::Bitmap => choice,
        IndexChoice::Bloom { epsilon, expected_nonzeros } => {
            IndexChoice::Bloom { epsilon, expected_nonzeros: expected_nonzeros.or_else(|| Some(union_support(gradients))) }
        }
        IndexChoice::Auto { .. } => choice.resolve(first.len(), union_support(gradients), cfg.gamma),
    };
    let mut acc = compress(first, cfg, choice)?;
    for g in &gradients[1..] {
        acc.merge_into(&compress(g, cfg, choice)?)?;
    }
    Ok(acc)
}

fn union_support(gradients: &[GradientVector]) -> u64 {
    let n = gradients[0].len() as usize;
    (0..n).filter(|&i| gradients.iter().any(|g| g.as_slice()[i] != 0.0)).count() as u64
}

/// One worker's side of a networked round: compress, submit, wait for the
/// aggregate, recover it.
#[cfg(feature = "net")]
pub fn worker_round(
    addr: impl std::net::ToSocketAddrs,
    worker: u16,
    round: u64,
    g: &GradientVector,
    cfg: &SketchConfig,
    choice: IndexChoice,
    timeout: std::time::Duration,
) -> Result<(GradientVector, RecoveryStats), WorkerError> {
    let cg = compress(g, cfg, choice)?;
    let merged = lhc_net::submit(addr, round, worker, &cg, timeout)?;
    Ok(recover(&merged)?)
}

#[cfg(feature = "net")]
#[derive(Debug, thiserror::Error)]
pub enum WorkerError {
    #[error(transparent)]
    Net(#[from] lhc_net::NetError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

#[cfg(feature = "net")]
impl From<lhc_core::Error> for WorkerError {
    fn from(e: lhc_core::Error) -> Self {
        WorkerError::Recovery(e.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lhc_core::{gen_synthetic, SparsityProfile, ValueLaw};

    fn int_grad(n: usize, sparsity: f64, seed: u64) -> GradientVector {
        gen_synthetic(n, &SparsityProfile::new(sparsity, seed).with_values(ValueLaw::Integer { bits: 12 })).unwrap()
    }

    #[test]
    fn single_worker_matches_plain_recover() {
        let g = int_grad(2000, 0.7, 1);
        let cfg = SketchConfig::new(100, 8, 3).unwrap();
        let (a, _) = allreduce_inmemory(std::slice::from_ref(&g), &cfg, IndexChoice::Bitmap).unwrap();
        let (b, _) = recover(&compress(&g, &cfg, IndexChoice::Bitmap).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn four_integer_workers_sum_exactly() {
        let gs: Vec<_> = (0..4).map(|s| int_grad(8192, 0.9, s)).collect();
        let cfg = SketchConfig::new(600, 8, 5).unwrap();
        let (out, stats) = allreduce_inmemory(&gs, &cfg, IndexChoice::Bitmap).unwrap();
        assert!(stats.is_lossless());
        let mut want = GradientVector::zeros(8192);
        for g in &gs {
            want = want.add(g).unwrap();
        }
        assert_eq!(out, want);
    }

    #[test]
    fn rejects_empty_and_ragged_inputs() {
        let cfg = SketchConfig::new(8, 1, 0).unwrap();
        assert!(allreduce_inmemory(&[], &cfg, IndexChoice::Bitmap).is_err());
        let gs = [GradientVector::zeros(4), GradientVector::zeros(5)];
        assert!(matches!(
            allreduce_inmemory(&gs, &cfg, IndexChoice::Bitmap),
            Err(RecoveryError::Core(lhc_core::Error::LengthMismatch { .. }))
        ));
    }
}
