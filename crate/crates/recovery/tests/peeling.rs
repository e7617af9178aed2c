use lhc_core::compressed::{compress, IndexChoice};
use lhc_core::{gen_synthetic, map_row, GradientVector, NzIndex, SketchConfig, SparsityProfile, ValueLaw};
use lhc_recovery::{peel, recover, recover_detailed};
use proptest::prelude::*;

fn int_grad(n: usize, sparsity: f64, seed: u64) -> GradientVector {
    gen_synthetic(n, &SparsityProfile::new(sparsity, seed).with_values(ValueLaw::Integer { bits: 16 })).unwrap()
}

/// x, y and z share cells except that z has one cell to itself: z peels in
/// the first round, which frees x and y for the second.
#[test]
fn lone_item_unlocks_the_rest() {
    let (x, y, z) = (0u64, 1u64, 2u64);
    let values = vec![5.0f32, -7.0, 11.0];
    let cfg = (0..10_000u64)
        .flat_map(|seed| (5..8).map(move |rows| SketchConfig::new(rows, 1, seed).unwrap()))
        .find(|cfg| {
            let cells = |p: u64| map_row(p, cfg).0.map(|s| s.row);
            let count = |r: u32| [x, y, z].iter().filter(|&&p| cells(p).contains(&r)).count();
            let lone = |p: u64| cells(p).iter().filter(|&&r| count(r) == 1).count();
            let mut sx = cells(x);
            let mut sy = cells(y);
            sx.sort();
            sy.sort();
            // Once z is gone, x and y must each own a cell.
            lone(x) == 0 && lone(y) == 0 && lone(z) == 1 && sx != sy
        })
        .expect("some seed gives the configuration");
    let cg = compress(&GradientVector::new(values.clone()).unwrap(), &cfg, IndexChoice::Bitmap).unwrap();
    let r = recover_detailed(&cg).unwrap();

    let round = |p: u64| r.peeled.resolved.iter().find(|q| q.position == p).unwrap().round;
    assert_eq!(round(z), 1);
    assert_eq!((round(x), round(y)), (2, 2));
    assert_eq!(r.stats.peel_iterations, 2);
    assert_eq!(r.stats.recovery_rate, 1.0);
    assert_eq!(r.gradient.as_slice(), values.as_slice());
}

#[test]
fn degree_and_ids_match_brute_force_after_stall() {
    // Under-provisioned so the decoder stops with a non-empty core.
    let n = 20_000;
    let g = int_grad(n, 0.5, 3);
    let cfg = SketchConfig::new(1000, 8, 4).unwrap();
    let cg = compress(&g, &cfg, IndexChoice::Bitmap).unwrap();
    let out = peel(cg.sketch(), cg.index()).unwrap();
    assert!(!out.unresolved.is_empty());
    assert!(out.state.core_cells() > 0);

    let mut degree = vec![0u32; cfg.cells()];
    let mut ids = vec![0u64; cfg.cells()];
    for &p in &out.unresolved {
        let m = map_row(p / 8, &cfg);
        for s in &m.0 {
            let cell = s.cell((p % 8) as u32, 8);
            degree[cell] += 1;
            ids[cell] ^= p;
        }
    }
    assert_eq!(out.state.degree(), degree.as_slice());
    assert_eq!(out.state.ids(), ids.as_slice());
    assert_eq!(out.resolved.len() + out.unresolved.len(), out.candidates as usize);
}

#[test]
fn integer_round_trip_above_threshold() {
    for seed in 0..10 {
        let g = int_grad(50_000, 0.8, seed);
        let cand = g.nonzero_count();
        let rows = lhc_core::sketch::rows_for_candidates(cand, 16, 1.3);
        let cfg = SketchConfig::new(rows, 16, seed).unwrap();
        let (back, stats) = recover(&compress(&g, &cfg, IndexChoice::Bitmap).unwrap()).unwrap();
        assert!(stats.is_lossless(), "seed {seed}: {stats:?}");
        assert_eq!(back, g);
    }
}

#[test]
fn bloom_false_positives_peel_to_zero() {
    let g = int_grad(100_000, 0.95, 8);
    let choice = IndexChoice::Bloom { epsilon: 0.01, expected_nonzeros: None };
    // The filter's hash seed follows the sketch seed.
    let cg0 = compress(&g, &SketchConfig::new(3, 1, 2).unwrap(), choice).unwrap();
    let claimed = cg0.index().candidates().len() as u64;
    assert!(claimed > g.nonzero_count());

    let cfg = SketchConfig::new(lhc_core::sketch::rows_for_candidates(claimed, 1, 1.3), 1, 2).unwrap();
    let (back, stats) = recover(&compress(&g, &cfg, choice).unwrap()).unwrap();
    assert_eq!(stats.candidates, claimed);
    assert!(stats.is_lossless());
    assert_eq!(back, g);
}

#[test]
fn lossless_flag_matches_fallback_count() {
    for (rows, seed) in [(40u32, 1u64), (400, 2), (4000, 3)] {
        let g = int_grad(10_000, 0.5, seed);
        let (_, s) = recover(&compress(&g, &SketchConfig::new(rows, 4, seed).unwrap(), IndexChoice::Bitmap).unwrap()).unwrap();
        assert!((0.0..=1.0).contains(&s.recovery_rate));
        assert_eq!(s.recovery_rate == 1.0, s.fallback_count == 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Unclaimed positions come back as exactly zero, whatever the sizing.
    #[test]
    fn unclaimed_positions_stay_zero(
        n in 1usize..3000,
        sparsity in 0.0f64..1.0,
        rows in 3u32..200,
        c in 1u32..32,
        seed: u64,
    ) {
        let g = gen_synthetic(n, &SparsityProfile::new(sparsity, seed)).unwrap();
        let cg = compress(&g, &SketchConfig::new(rows, c, seed).unwrap(), IndexChoice::Bitmap).unwrap();
        let (back, _) = recover(&cg).unwrap();
        for (o, r) in g.as_slice().iter().zip(back.as_slice()) {
            if *o == 0.0 {
                prop_assert_eq!(r.to_bits(), 0.0f32.to_bits());
            }
        }
    }

    /// Every peeled value is exact for integer data, even when peeling stalls.
    #[test]
    fn peeled_values_are_exact(n in 100usize..5000, rows in 3u32..300, seed: u64) {
        let g = int_grad(n, 0.5, seed);
        let cg = compress(&g, &SketchConfig::new(rows, 4, seed).unwrap(), IndexChoice::Bitmap).unwrap();
        let out = peel(cg.sketch(), cg.index()).unwrap();
        for r in &out.resolved {
            prop_assert_eq!(r.value, g.as_slice()[r.position as usize] as f64);
        }
    }
}

#[test]
fn index_claiming_nothing_recovers_zero_vector() {
    let cfg = SketchConfig::new(8, 2, 0).unwrap();
    let sketch = lhc_core::CountSketch::new(cfg).unwrap();
    let out = peel(&sketch, &NzIndex::bitmap(16)).unwrap();
    assert_eq!((out.iterations, out.candidates), (0, 0));
}
