//! Space accounting for sketch + index compression, in bits.
//!
//! `N` parameters of bit-width `C`, of which `n` are non-zero and
//! `lambda * n = N - n` are zero. All logarithms are base 2.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub nonzeros: f64,
    pub bit_width: u32,
    pub lambda: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

impl TheoryParams {
    pub fn total(&self) -> f64 {
        self.nonzeros * (1.0 + self.lambda)
    }

    fn validate(&self) -> Result<()> {
        if self.nonzeros.is_nan() || self.nonzeros < 1.0 {
            return Err(Error::Domain(format!("n must be at least 1, got {}", self.nonzeros)));
        }
        if self.bit_width == 0 {
            return Err(Error::Domain("bit width must be at least 1".into()));
        }
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(Error::Domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        check_epsilon(self.epsilon)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("epsilon must be in (0, 1], got {epsilon}")));
    }
    Ok(())
}

/// Binary entropy. `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// `(x + 1) * H(1 / (x + 1))`: bits per non-zero to locate `n` items among `n(1 + x)`.
pub fn locate_cost(x: f64) -> f64 {
    (x + 1.0) * binary_entropy(1.0 / (x + 1.0))
}

/// Bloom filter size for `n` items at false-positive rate `epsilon`:
/// `ceil(n * log2(1/epsilon) / ln 2)`.
pub fn bloom_size_bits(n: u64, epsilon: f64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    check_epsilon(epsilon)?;
    Ok((n as f64 * (1.0 / epsilon).log2() / LN_2).ceil() as u64)
}

/// Probes per item: `ceil(log2(1/epsilon))`.
pub fn bloom_probes(epsilon: f64) -> Result<u8> {
    check_epsilon(epsilon)?;
    let q = (1.0 / epsilon).log2().ceil();
    if q > u8::MAX as f64 {
        return Err(Error::Domain(format!("epsilon {epsilon} needs too many probes")));
    }
    Ok(q as u8)
}

/// False-positive rate minimising sketch + Bloom size:
/// `min(1, 1 / (ln^2 2 * gamma * C * lambda))`.
pub fn optimal_epsilon(bit_width: u32, lambda: f64, gamma: f64) -> f64 {
    let denom = LN_2 * LN_2 * gamma * bit_width as f64 * lambda;
    if denom <= 1.0 {
        1.0
    } else {
        1.0 / denom
    }
}

/// Lower bound on lossless size: `n * locate_cost(lambda) + n * log2(2^C - 1)`.
pub fn s_min_bits(p: &TheoryParams) -> Result<f64> {
    p.validate()?;
    let value_bits = if p.bit_width >= 53 {
        p.bit_width as f64
    } else {
        ((1u64 << p.bit_width) as f64 - 1.0).log2()
    };
    Ok(p.nonzeros * locate_cost(p.lambda) + p.nonzeros * value_bits)
}

/// Achievable `(index bits, sketch bits)` with a Bloom index at `p.epsilon`.
///
/// Index: `n / ln 2 * log2(1/eps)`. Sketch: `gamma * C * n * (1 + eps * lambda)`.
/// Unrounded, so the pair compares directly with [`s_min_bits`].
pub fn total_compressed_bits(p: &TheoryParams) -> Result<(f64, f64)> {
    p.validate()?;
    let index = p.nonzeros / LN_2 * (1.0 / p.epsilon).log2();
    let sketch = p.gamma * p.bit_width as f64 * p.nonzeros * (1.0 + p.epsilon * p.lambda);
    Ok((index, sketch))
}

/// One row of the theoretical size curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryRow {
    pub bit_width: u32,
    pub lambda: f64,
    pub epsilon: f64,
    pub index_bits: f64,
    pub sketch_bits: f64,
    pub s_min: f64,
}

impl TheoryRow {
    pub fn ratio(&self) -> f64 {
        (self.index_bits + self.sketch_bits) / self.s_min
    }
}

pub fn theory_row(nonzeros: f64, bit_width: u32, lambda: f64, gamma: f64) -> Result<TheoryRow> {
    let epsilon = optimal_epsilon(bit_width, lambda, gamma);
    let p = TheoryParams { nonzeros, bit_width, lambda, epsilon, gamma };
    let (index_bits, sketch_bits) = total_compressed_bits(&p)?;
    Ok(TheoryRow { bit_width, lambda, epsilon, index_bits, sketch_bits, s_min: s_min_bits(&p)? })
}
