//! Dense gradient vectors, synthetic sparse generators and recovery metrics.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A dense vector of 32-bit parameters. Every value is finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientVector {
    values: Vec<f32>,
}

impl GradientVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos as u64));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn len(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.values
    }

    pub fn nonzero_count(&self) -> u64 {
        self.values.iter().filter(|v| **v != 0.0).count() as u64
    }

    /// Element-wise sum. Used by tests and examples as the aggregation oracle.
    pub fn add(&self, other: &GradientVector) -> Result<GradientVector> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { left: self.len(), right: other.len() });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        GradientVector::new(values)
    }
}

/// How the zero positions are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroLayout {
    /// Zero positions sampled uniformly without replacement.
    Uniform,
    /// Zeros placed in contiguous runs of `run` parameters.
    Clustered { run: usize },
}

impl ZeroLayout {
    pub const DEFAULT_RUN: usize = 256;

    pub fn clustered() -> Self {
        ZeroLayout::Clustered { run: Self::DEFAULT_RUN }
    }
}

/// Distribution of the non-zero values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueLaw {
    StandardNormal,
    /// Uniform on (-1, 1).
    Uniform,
    /// Integers uniform on `1..=2^bits - 1`. `bits` must be at most 24 so
    /// every value, and every small sum of values, is exact in `f32`.
    Integer { bits: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityProfile {
    pub sparsity: f64,
    pub layout: ZeroLayout,
    pub values: ValueLaw,
    pub seed: u64,
}

impl SparsityProfile {
    pub fn new(sparsity: f64, seed: u64) -> Self {
        Self { sparsity, layout: ZeroLayout::Uniform, values: ValueLaw::StandardNormal, seed }
    }

    pub fn with_layout(mut self, layout: ZeroLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn with_values(mut self, values: ValueLaw) -> Self {
        self.values = values;
        self
    }

    /// Average gradient sparsity of well-known models, by name.
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        let sparsity = match name {
            "ncf" => 0.989,
            "lstm" => 0.945,
            "vgg19" => 0.304,
            "bert" => 0.208,
            _ => return None,
        };
        Some(Self::new(sparsity, seed))
    }
}

pub const PRESETS: [&str; 4] = ["ncf", "lstm", "vgg19", "bert"];

/// Generates a vector with exactly `round(sparsity * n_params)` zeros.
///
/// The output is a pure function of `(n_params, profile)`.
pub fn gen_synthetic(n_params: usize, profile: &SparsityProfile) -> Result<GradientVector> {
    if !(0.0..=1.0).contains(&profile.sparsity) {
        return Err(Error::InvalidSparsity(profile.sparsity));
    }
    if n_params == 0 {
        return Err(Error::InvalidConfig("n_params must be at least 1".into()));
    }
    if let ValueLaw::Integer { bits } = profile.values {
        if !(1..=24).contains(&bits) {
            return Err(Error::InvalidConfig(format!("integer value law needs 1..=24 bits, got {bits}")));
        }
    }
    let zeros = ((profile.sparsity * n_params as f64).round() as usize).min(n_params);
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);

    let mut is_zero = vec![false; n_params];
    match profile.layout {
        ZeroLayout::Uniform => {
            for pos in rand::seq::index::sample(&mut rng, n_params, zeros) {
                is_zero[pos] = true;
            }
        }
        ZeroLayout::Clustered { run } => {
            let run = run.max(1);
            let mut slots: Vec<usize> = (0..n_params.div_ceil(run)).collect();
            slots.shuffle(&mut rng);
            let mut remaining = zeros;
            for slot in slots {
                if remaining == 0 {
                    break;
                }
                let start = slot * run;
                let end = (start + run).min(n_params);
                let take = remaining.min(end - start);
                is_zero[start..start + take].fill(true);
                remaining -= take;
            }
        }
    }

    let values = is_zero
        .into_iter()
        .map(|zero| if zero { 0.0 } else { draw_nonzero(&mut rng, profile.values) })
        .collect();
    Ok(GradientVector { values })
}

fn draw_nonzero(rng: &mut ChaCha8Rng, law: ValueLaw) -> f32 {
    loop {
        let v = match law {
            ValueLaw::StandardNormal => rng.sample::<f64, _>(StandardNormal) as f32,
            ValueLaw::Uniform => rng.random_range(-1.0f32..1.0),
            ValueLaw::Integer { bits } => rng.random_range(1u32..=(1u32 << bits) - 1) as f32,
        };
        if v != 0.0 {
            return v;
        }
    }
}

/// Fraction of parameters equal to zero.
pub fn sparsity(v: &GradientVector) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let zeros = v.values.iter().filter(|x| **x == 0.0).count();
    zeros as f64 / v.values.len() as f64
}

/// Accuracy of a recovered vector against the original.
///
/// Relative error is undefined where the original is zero, so those
/// positions are summarised separately as a mean absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorSummary {
    /// Mean of `|rec - orig| / |orig|` over positions with `orig != 0`.
    pub mean_relative: f64,
    pub nonzero_count: u64,
    /// Mean of `|rec|` over positions with `orig == 0`.
    pub mean_abs_at_zeros: f64,
    pub zero_count: u64,
}

pub fn average_relative_error(original: &GradientVector, recovered: &GradientVector) -> Result<ErrorSummary> {
    if original.len() != recovered.len() {
        return Err(Error::LengthMismatch { left: original.len(), right: recovered.len() });
    }
    let mut s = ErrorSummary::default();
    let (mut rel_sum, mut abs_sum) = (0.0f64, 0.0f64);
    for (&o, &r) in original.values.iter().zip(&recovered.values) {
        if o == 0.0 {
            s.zero_count += 1;
            abs_sum += (r as f64).abs();
        } else {
            s.nonzero_count += 1;
            rel_sum += ((r as f64 - o as f64) / o as f64).abs();
        }
    }
    if s.nonzero_count > 0 {
        s.mean_relative = rel_sum / s.nonzero_count as f64;
    }
    if s.zero_count > 0 {
        s.mean_abs_at_zeros = abs_sum / s.zero_count as f64;
    }
    Ok(s)
}

/// Element type recorded in gradient files and compressed headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DType {
    Float32 = 0x00,
    Int32 = 0x01,
}

impl DType {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0x00 => Ok(DType::Float32),
            0x01 => Ok(DType::Int32),
            other => Err(Error::Format(format!("unknown dtype code {other:#04x}"))),
        }
    }
}

pub const GRADIENT_MAGIC: &[u8; 4] = b"LHCG";
pub const GRADIENT_VERSION: u8 = 0x01;

/// Largest integer magnitude that round-trips through `f32` exactly.
const F32_EXACT_INT: f32 = 16_777_216.0;

/// Writes `LHCG | version | N: u64 | dtype | values`, little-endian.
pub fn write_gradient<W: Write>(mut w: W, g: &GradientVector, dtype: DType) -> Result<()> {
    let mut buf = Vec::with_capacity(14 + g.values.len() * 4);
    buf.extend_from_slice(GRADIENT_MAGIC);
    buf.push(GRADIENT_VERSION);
    buf.extend_from_slice(&g.len().to_le_bytes());
    buf.push(dtype as u8);
    match dtype {
        DType::Float32 => {
            for v in &g.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        DType::Int32 => {
            for (pos, v) in g.values.iter().enumerate() {
                if v.fract() != 0.0 || v.abs() > F32_EXACT_INT {
                    return Err(Error::Domain(format!("value {v} at {pos} is not an exact int32")));
                }
                buf.extend_from_slice(&(*v as i32).to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_gradient<R: Read>(mut r: R) -> Result<(GradientVector, DType)> {
    let mut head = [0u8; 14];
    r.read_exact(&mut head).map_err(|e| truncated(e, "gradient header"))?;
    if &head[..4] != GRADIENT_MAGIC {
        return Err(Error::Format("bad gradient magic".into()));
    }
    if head[4] != GRADIENT_VERSION {
        return Err(Error::Format(format!("unsupported gradient version {}", head[4])));
    }
    let n = u64::from_le_bytes(head[5..13].try_into().unwrap());
    let dtype = DType::from_code(head[13])?;
    let bytes = n
        .checked_mul(4)
        .and_then(|b| usize::try_from(b).ok())
        .ok_or_else(|| Error::Format(format!("gradient length {n} too large")))?;
    let mut raw = Vec::new();
    r.take(bytes as u64).read_to_end(&mut raw)?;
    if raw.len() != bytes {
        return Err(Error::Format(format!("expected {bytes} value bytes, found {}", raw.len())));
    }
    let chunks = raw.chunks_exact(4).map(|c| <[u8; 4]>::try_from(c).unwrap());
    let values = match dtype {
        DType::Float32 => chunks.map(f32::from_le_bytes).collect(),
        DType::Int32 => chunks
            .enumerate()
            .map(|(pos, c)| {
                let v = i32::from_le_bytes(c);
                if (v as f32).abs() > F32_EXACT_INT {
                    Err(Error::Domain(format!("int32 value {v} at {pos} exceeds exact f32 range")))
                } else {
                    Ok(v as f32)
                }
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok((GradientVector::new(values)?, dtype))
}

fn truncated(e: std::io::Error, what: &str) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format(format!("truncated {what}"))
    } else {
        Error::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_profile() {
        let g = gen_synthetic(8, &SparsityProfile::new(1.0, 7)).unwrap();
        assert_eq!(g.as_slice(), &[0.0; 8]);
    }

    #[test]
    fn dense_profile_is_reproducible() {
        let p = SparsityProfile::new(0.0, 7);
        let a = gen_synthetic(8, &p).unwrap();
        let b = gen_synthetic(8, &p).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|v| *v != 0.0 && v.is_finite()));
    }

    #[test]
    fn exact_zero_count_at_scale() {
        let n = 1_000_000;
        let g = gen_synthetic(n, &SparsityProfile::new(0.696, 1)).unwrap();
        let zeros = g.as_slice().iter().filter(|v| **v == 0.0).count();
        assert_eq!(zeros, 696_000);
        assert_eq!(sparsity(&g), 0.696);
    }

    #[test]
    fn vgg19_preset_is_exact() {
        let p = SparsityProfile::preset("vgg19", 3).unwrap();
        let g = gen_synthetic(100_000, &p).unwrap();
        assert_eq!(sparsity(&g), 0.304);
    }

    #[test]
    fn clustered_zeros_form_runs() {
        let p = SparsityProfile::new(0.5, 9).with_layout(ZeroLayout::Clustered { run: 16 });
        let g = gen_synthetic(1000, &p).unwrap();
        assert_eq!(sparsity(&g), 0.5);
        // 500 zeros in runs of 16 starting at slot boundaries: 31 full runs + one of 4.
        let mut runs = 0;
        let mut prev_zero = false;
        for v in g.as_slice() {
            let z = *v == 0.0;
            if z && !prev_zero {
                runs += 1;
            }
            prev_zero = z;
        }
        assert!(runs <= 32, "got {runs} runs");
    }

    #[test]
    fn rejects_bad_sparsity() {
        assert!(matches!(gen_synthetic(4, &SparsityProfile::new(1.5, 0)), Err(Error::InvalidSparsity(_))));
        assert!(gen_synthetic(4, &SparsityProfile::new(-0.1, 0)).is_err());
    }

    #[test]
    fn integer_law_values() {
        let p = SparsityProfile::new(0.2, 5).with_values(ValueLaw::Integer { bits: 4 });
        let g = gen_synthetic(500, &p).unwrap();
        for v in g.as_slice().iter().filter(|v| **v != 0.0) {
            assert_eq!(v.fract(), 0.0);
            assert!((1.0..=15.0).contains(v));
        }
    }

    #[test]
    fn sparsity_direct_count() {
        let g = GradientVector::new(vec![0.0, 1.5, 0.0, -2.0]).unwrap();
        assert_eq!(sparsity(&g), 0.5);
        assert_eq!(sparsity(&GradientVector::zeros(5)), 1.0);
    }

    #[test]
    fn relative_error_examples() {
        let a = GradientVector::new(vec![2.0]).unwrap();
        let b = GradientVector::new(vec![1.0]).unwrap();
        assert_eq!(average_relative_error(&a, &b).unwrap().mean_relative, 0.5);

        let o = GradientVector::new(vec![1.0, 2.0, 4.0]).unwrap();
        let r = GradientVector::new(vec![1.0, 1.0, 4.0]).unwrap();
        let s = average_relative_error(&o, &r).unwrap();
        assert!((s.mean_relative - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(average_relative_error(&o, &o).unwrap().mean_relative, 0.0);
    }

    #[test]
    fn relative_error_splits_zero_positions() {
        let o = GradientVector::new(vec![0.0, 2.0, 0.0]).unwrap();
        let r = GradientVector::new(vec![0.5, 2.0, -1.5]).unwrap();
        let s = average_relative_error(&o, &r).unwrap();
        assert_eq!(s.mean_relative, 0.0);
        assert_eq!(s.zero_count, 2);
        assert_eq!(s.mean_abs_at_zeros, 1.0);
    }

    #[test]
    fn relative_error_length_mismatch() {
        let err = average_relative_error(&GradientVector::zeros(2), &GradientVector::zeros(3));
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(GradientVector::new(vec![1.0, f32::NAN]), Err(Error::NonFinite(1))));
    }

    #[test]
    fn gradient_file_layout() {
        let g = GradientVector::new(vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_gradient(&mut buf, &g, DType::Int32).unwrap();
        assert_eq!(&buf[..4], b"LHCG");
        assert_eq!(buf[4], 0x01);
        assert_eq!(&buf[5..13], &2u64.to_le_bytes());
        assert_eq!(buf[13], 0x01);
        assert_eq!(&buf[14..18], &1i32.to_le_bytes());
        assert_eq!(&buf[18..22], &(-2i32).to_le_bytes());
        let (back, dtype) = read_gradient(&buf[..]).unwrap();
        assert_eq!(back, g);
        assert_eq!(dtype, DType::Int32);
    }

    #[test]
    fn gradient_file_errors() {
        let g = GradientVector::new(vec![0.5]).unwrap();
        assert!(write_gradient(Vec::new(), &g, DType::Int32).is_err());
        let mut buf = Vec::new();
        write_gradient(&mut buf, &g, DType::Float32).unwrap();
        assert!(read_gradient(&buf[..buf.len() - 1]).is_err());
        buf[0] = b'X';
        assert!(read_gradient(&buf[..]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn generator_is_pure_and_exact(n in 1usize..2000, s in 0.0f64..=1.0, seed: u64) {
            let p = SparsityProfile::new(s, seed).with_layout(if seed % 2 == 0 { ZeroLayout::Uniform } else { ZeroLayout::Clustered { run: 7 } });
            let a = gen_synthetic(n, &p).unwrap();
            let b = gen_synthetic(n, &p).unwrap();
            proptest::prop_assert_eq!(&a, &b);
            let zeros = a.as_slice().iter().filter(|v| **v == 0.0).count();
            proptest::prop_assert_eq!(zeros, (s * n as f64).round() as usize);
        }

        #[test]
        fn self_error_is_zero(vals in proptest::collection::vec(-1e6f32..1e6, 1..64)) {
            let g = GradientVector::new(vals).unwrap();
            proptest::prop_assert_eq!(average_relative_error(&g, &g).unwrap().mean_relative, 0.0);
        }
    }
}
