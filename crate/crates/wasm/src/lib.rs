//! Browser bindings for the demo page in `www/`.
//!
//! The computations are plain functions so they are tested natively; the
//! `#[wasm_bindgen]` wrappers only flatten results into `Float64Array`s.

use lhc_core::compressed::IndexChoice;
use lhc_core::theory::theory_row;
use lhc_core::{compress, gen_synthetic, SketchConfig, SparsityProfile};
use lhc_recovery::curve::{config_for_fraction, curve_point};
use lhc_recovery::{peel, RecoveryError};
use wasm_bindgen::prelude::*;

/// Largest gradient the page will generate; keeps a click under a second or two.
pub const MAX_PARAMS: usize = 1 << 20;

fn check_size(n: usize) -> Result<(), RecoveryError> {
    if n == 0 || n > MAX_PARAMS {
        return Err(lhc_core::Error::InvalidConfig(format!("n must be in 1..={MAX_PARAMS}, got {n}")).into());
    }
    Ok(())
}

/// Mean recovery rate over `seeds` gradients at each sketch fraction.
pub fn recovery_curve(
    n: usize,
    sparsity: f64,
    batch_width: u32,
    fractions: &[f64],
    seeds: u64,
) -> Result<Vec<f64>, RecoveryError> {
    check_size(n)?;
    let mut sums = vec![0.0; fractions.len()];
    for seed in 0..seeds {
        let g = gen_synthetic(n, &SparsityProfile::new(sparsity, seed))?;
        let template = SketchConfig::new(3, batch_width, seed)?;
        for (sum, &f) in sums.iter_mut().zip(fractions) {
            *sum += curve_point(&g, f, &template, IndexChoice::Bitmap)?.stats.recovery_rate;
        }
    }
    Ok(sums.into_iter().map(|s| s / seeds.max(1) as f64).collect())
}

/// `(epsilon, size / lower bound)` at each lambda, Bloom rate chosen optimally.
pub fn theory_curve(
    nonzeros: f64,
    bit_width: u32,
    gamma: f64,
    lambdas: &[f64],
) -> Result<Vec<(f64, f64)>, RecoveryError> {
    lambdas
        .iter()
        .map(|&l| {
            let row = theory_row(nonzeros, bit_width, l, gamma)?;
            Ok((row.epsilon, row.ratio()))
        })
        .collect()
}

/// Positions resolved in each peeling round, followed by the count left
/// unresolved.
pub fn peel_trace(
    n: usize,
    sparsity: f64,
    batch_width: u32,
    fraction: f64,
    seed: u64,
) -> Result<Vec<u64>, RecoveryError> {
    check_size(n)?;
    let g = gen_synthetic(n, &SparsityProfile::new(sparsity, seed))?;
    let cfg = config_for_fraction(&SketchConfig::new(3, batch_width, seed)?, n as u64, fraction)?;
    let cg = compress(&g, &cfg, IndexChoice::Bitmap)?;
    let out = peel(cg.sketch(), cg.index())?;
    let mut per_round = vec![0u64; out.iterations as usize];
    for r in &out.resolved {
        per_round[r.round as usize - 1] += 1;
    }
    per_round.push(out.unresolved.len() as u64);
    Ok(per_round)
}

fn js(e: RecoveryError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = recoveryCurve)]
pub fn recovery_curve_js(
    n: usize,
    sparsity: f64,
    batch_width: u32,
    fractions: Vec<f64>,
    seeds: u32,
) -> Result<Vec<f64>, JsError> {
    recovery_curve(n, sparsity, batch_width, &fractions, seeds as u64).map_err(js)
}

/// Flattened `[epsilon, ratio, epsilon, ratio, ...]`.
#[wasm_bindgen(js_name = theoryCurve)]
pub fn theory_curve_js(nonzeros: f64, bit_width: u32, gamma: f64, lambdas: Vec<f64>) -> Result<Vec<f64>, JsError> {
    let pts = theory_curve(nonzeros, bit_width, gamma, &lambdas).map_err(js)?;
    Ok(pts.into_iter().flat_map(|(e, r)| [e, r]).collect())
}

#[wasm_bindgen(js_name = peelTrace)]
pub fn peel_trace_js(n: usize, sparsity: f64, batch_width: u32, fraction: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    let trace = peel_trace(n, sparsity, batch_width, fraction, seed as u64).map_err(js)?;
    Ok(trace.into_iter().map(|c| c as f64).collect())
}
