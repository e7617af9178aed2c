//! Per-round merge bookkeeping, independent of any transport.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use lhc_core::frame::NackReason;
use lhc_core::CompressedGradient;

#[derive(Debug)]
struct Round {
    partial: CompressedGradient,
    seen: BTreeSet<u16>,
    opened: Instant,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Submission {
    /// Accepted; the round still waits for more workers.
    Pending { received: u16 },
    /// The round's last submission arrived. Its state has been discarded.
    Complete { merged: CompressedGradient, workers: Vec<u16> },
    Rejected(NackReason),
}

/// Open rounds keyed by round id.
///
/// A round's partial result is always the merge of exactly the payloads of
/// the workers in its `seen` set.
#[derive(Debug)]
pub struct AggregatorState {
    expected: u16,
    timeout: Duration,
    rounds: HashMap<u64, Round>,
}

impl AggregatorState {
    pub fn new(expected: u16, timeout: Duration) -> Self {
        assert!(expected >= 1, "an aggregator needs at least one worker");
        Self { expected, timeout, rounds: HashMap::new() }
    }

    pub fn expected(&self) -> u16 {
        self.expected
    }

    pub fn open_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Parses and submits a raw payload. Unparseable payloads are rejected as
    /// a size mismatch, which is the only way a well-framed payload can be
    /// malformed.
    pub fn submit_bytes(&mut self, round: u64, worker: u16, payload: &[u8], now: Instant) -> Submission {
        match CompressedGradient::from_bytes(payload) {
            Ok(cg) => self.submit(round, worker, cg, now),
            Err(_) => Submission::Rejected(NackReason::SizeMismatch),
        }
    }

    pub fn submit(&mut self, round: u64, worker: u16, cg: CompressedGradient, now: Instant) -> Submission {
        let expected = self.expected;
        let Some(r) = self.rounds.get_mut(&round) else {
            if expected == 1 {
                return Submission::Complete { merged: cg, workers: vec![worker] };
            }
            let seen = BTreeSet::from([worker]);
            self.rounds.insert(round, Round { partial: cg, seen, opened: now });
            return Submission::Pending { received: 1 };
        };
        if r.seen.contains(&worker) {
            return Submission::Rejected(NackReason::Duplicate);
        }
        if !r.partial.merge_compatible(&cg) {
            return Submission::Rejected(NackReason::HeaderMismatch);
        }
        if r.partial.merge_into(&cg).is_err() {
            return Submission::Rejected(NackReason::HeaderMismatch);
        }
        r.seen.insert(worker);
        if r.seen.len() < expected as usize {
            return Submission::Pending { received: r.seen.len() as u16 };
        }
        let done = self.rounds.remove(&round).expect("round present");
        Submission::Complete { merged: done.partial, workers: done.seen.into_iter().collect() }
    }

    /// Drops rounds open for longer than the timeout and returns their ids.
    pub fn expire(&mut self, now: Instant) -> Vec<u64> {
        let timeout = self.timeout;
        let stale: Vec<u64> = self
            .rounds
            .iter()
            .filter(|(_, r)| now.saturating_duration_since(r.opened) >= timeout)
            .map(|(id, _)| *id)
            .collect();
        for id in &stale {
            self.rounds.remove(id);
        }
        stale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lhc_core::compressed::{compress, IndexChoice};
    use lhc_core::{GradientVector, SketchConfig};

    fn cg(values: &[f32], seed: u64) -> CompressedGradient {
        let cfg = SketchConfig::new(8, 2, seed).unwrap();
        compress(&GradientVector::new(values.to_vec()).unwrap(), &cfg, IndexChoice::Bitmap).unwrap()
    }

    #[test]
    fn single_worker_echoes() {
        let mut st = AggregatorState::new(1, Duration::from_secs(1));
        let x = cg(&[1.0, 0.0, 2.0, 0.0], 1);
        let out = st.submit(7, 0, x.clone(), Instant::now());
        assert_eq!(out, Submission::Complete { merged: x, workers: vec![0] });
        assert_eq!(st.open_rounds(), 0);
    }

    #[test]
    fn merges_then_discards_round() {
        let now = Instant::now();
        let mut st = AggregatorState::new(3, Duration::from_secs(1));
        let parts = [cg(&[1.0, 0.0, 0.0, 0.0], 1), cg(&[0.0, 2.0, 0.0, 0.0], 1), cg(&[0.0, 0.0, 0.0, 4.0], 1)];
        assert_eq!(st.submit(1, 2, parts[0].clone(), now), Submission::Pending { received: 1 });
        assert_eq!(st.submit(1, 0, parts[1].clone(), now), Submission::Pending { received: 2 });
        let Submission::Complete { merged, workers } = st.submit(1, 1, parts[2].clone(), now) else {
            panic!("round should complete");
        };
        assert_eq!(workers, vec![0, 1, 2]);
        assert_eq!(merged, parts[0].merge(&parts[1]).unwrap().merge(&parts[2]).unwrap());
        assert_eq!(merged.workers(), 3);
        assert_eq!(st.open_rounds(), 0);
    }

    #[test]
    fn rejections_leave_round_untouched() {
        let now = Instant::now();
        let mut st = AggregatorState::new(2, Duration::from_secs(1));
        let a = cg(&[1.0, 0.0, 0.0, 0.0], 1);
        st.submit(5, 0, a.clone(), now);
        assert_eq!(st.submit(5, 0, a.clone(), now), Submission::Rejected(NackReason::Duplicate));
        assert_eq!(st.submit(5, 1, cg(&[1.0, 0.0, 0.0, 0.0], 2), now), Submission::Rejected(NackReason::HeaderMismatch));
        assert_eq!(st.submit_bytes(5, 1, b"garbage", now), Submission::Rejected(NackReason::SizeMismatch));
        let Submission::Complete { merged, .. } = st.submit(5, 1, a.clone(), now) else { panic!() };
        assert_eq!(merged, a.merge(&a).unwrap());
    }

    #[test]
    fn stale_rounds_expire_alone() {
        let t0 = Instant::now();
        let mut st = AggregatorState::new(2, Duration::from_millis(100));
        st.submit(1, 0, cg(&[1.0, 0.0], 1), t0);
        st.submit(2, 0, cg(&[1.0, 0.0], 1), t0 + Duration::from_millis(80));
        assert_eq!(st.expire(t0 + Duration::from_millis(120)), vec![1]);
        assert_eq!(st.open_rounds(), 1);
        let done = st.submit(2, 1, cg(&[0.0, 3.0], 1), t0 + Duration::from_millis(130));
        assert!(matches!(done, Submission::Complete { .. }));
    }
}
