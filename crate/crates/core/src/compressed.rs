//! The compressed form `[sketch, index]` of a gradient, its merge, and its
//! byte layout.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "LHCS" | version u8 | N u64 | batch_width u32 | rows u32 | seed u64
//!        | index kind u8 | dtype u8 | workers u16 | block_rows u32
//! cells: rows * batch_width f32, row-major
//! index: kind u8 | nbits u64 | probes u8 | ceil(nbits / 8) bytes
//! ```
//!
//! `block_rows = 0` means the unblocked layout.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::gradient::{DType, GradientVector};
use crate::hash::mix64;
use crate::index::{IndexKind, NzIndex};
use crate::sketch::{CountSketch, SketchConfig};
use crate::theory;

pub const MAGIC: &[u8; 4] = b"LHCS";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 37;
const INDEX_PREFIX_LEN: usize = 10;
const BLOOM_SEED_SALT: u64 = 0x4c48_4353_626c_6f6f;

/// Value bit-width assumed when sizing a Bloom index automatically.
pub const VALUE_BITS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndexChoice {
    Bitmap,
    /// Bloom filter at false-positive rate `epsilon`. Every worker of a round
    /// must size the filter identically, so multi-worker callers pass the
    /// agreed `expected_nonzeros`; `None` sizes it from the local gradient.
    Bloom { epsilon: f64, expected_nonzeros: Option<u64> },
    /// Bloom at the optimal rate when that is smaller than a bitmap, else bitmap.
    Auto { expected_nonzeros: Option<u64> },
}

impl IndexChoice {
    /// Resolves `Auto` into a concrete choice for `n_params` positions.
    pub fn resolve(&self, n_params: u64, nonzeros: u64, gamma: f64) -> IndexChoice {
        match *self {
            IndexChoice::Auto { expected_nonzeros } => {
                let n = expected_nonzeros.unwrap_or(nonzeros);
                if n == 0 || n >= n_params {
                    return IndexChoice::Bitmap;
                }
                let lambda = (n_params - n) as f64 / n as f64;
                let epsilon = theory::optimal_epsilon(VALUE_BITS, lambda, gamma);
                match theory::bloom_size_bits(n, epsilon) {
                    Ok(bits) if bits < n_params => IndexChoice::Bloom { epsilon, expected_nonzeros: Some(n) },
                    _ => IndexChoice::Bitmap,
                }
            }
            other => other,
        }
    }
}

/// Fixed-size header of a [`CompressedGradient`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Header {
    pub n_params: u64,
    pub batch_width: u32,
    pub rows: u32,
    pub seed: u64,
    pub index_kind: IndexKind,
    pub dtype: DType,
    pub workers: u16,
    pub block_rows: u32,
}

impl Header {
    /// Two payloads can be merged iff their headers agree on everything but `workers`.
    pub fn merge_compatible(&self, other: &Header) -> bool {
        Header { workers: 0, ..*self } == Header { workers: 0, ..*other }
    }

    pub fn sketch_config(&self) -> Result<SketchConfig> {
        let cfg = SketchConfig::new(self.rows, self.batch_width, self.seed)?;
        match self.block_rows {
            0 => Ok(cfg),
            b => cfg.with_blocks(b),
        }
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.n_params.to_le_bytes());
        out.extend_from_slice(&self.batch_width.to_le_bytes());
        out.extend_from_slice(&self.rows.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.push(self.index_kind as u8);
        out.push(self.dtype as u8);
        out.extend_from_slice(&self.workers.to_le_bytes());
        out.extend_from_slice(&self.block_rows.to_le_bytes());
    }

    pub fn decode(b: &[u8]) -> Result<Header> {
        if b.len() < HEADER_LEN {
            return Err(Error::Format(format!("header needs {HEADER_LEN} bytes, found {}", b.len())));
        }
        if &b[..4] != MAGIC {
            return Err(Error::Format("bad compressed-gradient magic".into()));
        }
        if b[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", b[4])));
        }
        Ok(Header {
            n_params: u64::from_le_bytes(b[5..13].try_into().unwrap()),
            batch_width: u32::from_le_bytes(b[13..17].try_into().unwrap()),
            rows: u32::from_le_bytes(b[17..21].try_into().unwrap()),
            seed: u64::from_le_bytes(b[21..29].try_into().unwrap()),
            index_kind: IndexKind::from_code(b[29])?,
            dtype: DType::from_code(b[30])?,
            workers: u16::from_le_bytes(b[31..33].try_into().unwrap()),
            block_rows: u32::from_le_bytes(b[33..37].try_into().unwrap()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedGradient {
    sketch: CountSketch,
    index: NzIndex,
    dtype: DType,
    workers: u16,
}

fn bloom_seed(seed: u64) -> u64 {
    mix64(seed ^ BLOOM_SEED_SALT)
}

/// Builds the sketch and index of `g`. Deterministic given the config seed.
///
/// The parameter vector is zero-padded to whole batches; padding is never
/// marked in the index.
pub fn compress(g: &GradientVector, cfg: &SketchConfig, choice: IndexChoice) -> Result<CompressedGradient> {
    cfg.validate()?;
    let n = g.len();
    if n == 0 {
        return Err(Error::InvalidConfig("cannot compress an empty gradient".into()));
    }
    let values = g.as_slice();
    let index = match choice.resolve(n, g.nonzero_count(), cfg.gamma) {
        IndexChoice::Bloom { epsilon, expected_nonzeros } => {
            let expected = expected_nonzeros.unwrap_or_else(|| g.nonzero_count());
            NzIndex::bloom(n, expected, epsilon, bloom_seed(cfg.seed))?
        }
        _ => NzIndex::bitmap(n),
    };
    let mut cg = CompressedGradient { sketch: CountSketch::new(*cfg)?, index, dtype: DType::Float32, workers: 1 };

    let c = cfg.batch_width as usize;
    let mut padded = vec![0.0f32; c];
    for (i, chunk) in values.chunks(c).enumerate() {
        if chunk.iter().all(|v| *v == 0.0) {
            continue;
        }
        for (t, v) in chunk.iter().enumerate() {
            if *v != 0.0 {
                cg.index.mark_nonzero((i * c + t) as u64)?;
            }
        }
        let row = if chunk.len() == c {
            chunk
        } else {
            padded[..chunk.len()].copy_from_slice(chunk);
            padded[chunk.len()..].fill(0.0);
            &padded[..]
        };
        cg.sketch.insert_row(i as u64, row);
    }
    Ok(cg)
}

impl CompressedGradient {
    pub fn from_parts(sketch: CountSketch, index: NzIndex, dtype: DType, workers: u16) -> Result<Self> {
        let cg = Self { sketch, index, dtype, workers };
        cg.check_consistent()?;
        Ok(cg)
    }

    fn check_consistent(&self) -> Result<()> {
        if self.index.kind() == IndexKind::Bloom && self.index.seed() != bloom_seed(self.sketch.config().seed) {
            return Err(Error::Format("bloom seed does not match sketch seed".into()));
        }
        Ok(())
    }

    pub fn with_dtype(mut self, dtype: DType) -> Self {
        self.dtype = dtype;
        self
    }

    pub fn header(&self) -> Header {
        let cfg = self.sketch.config();
        Header {
            n_params: self.index.len(),
            batch_width: cfg.batch_width,
            rows: cfg.rows,
            seed: cfg.seed,
            index_kind: self.index.kind(),
            dtype: self.dtype,
            workers: self.workers,
            block_rows: cfg.block_rows.unwrap_or(0),
        }
    }

    pub fn sketch(&self) -> &CountSketch {
        &self.sketch
    }

    pub fn index(&self) -> &NzIndex {
        &self.index
    }

    pub fn n_params(&self) -> u64 {
        self.index.len()
    }

    pub fn workers(&self) -> u16 {
        self.workers
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn merge_compatible(&self, other: &CompressedGradient) -> bool {
        self.header().merge_compatible(&other.header()) && self.index.same_shape(&other.index)
    }

    /// Sum of sketches, OR of indexes. Never looks at individual values.
    pub fn merge(&self, other: &CompressedGradient) -> Result<CompressedGradient> {
        let mut out = self.clone();
        out.merge_into(other)?;
        Ok(out)
    }

    pub fn merge_into(&mut self, other: &CompressedGradient) -> Result<()> {
        if !self.merge_compatible(other) {
            return Err(Error::Incompatible(format!(
                "headers differ: {:?} vs {:?}",
                self.header(),
                other.header()
            )));
        }
        self.sketch.merge_into(&other.sketch)?;
        self.index.merge_into(&other.index)?;
        self.workers = self.workers.saturating_add(other.workers);
        Ok(())
    }

    /// Sketch cells plus index bits, excluding framing.
    pub fn payload_bits(&self) -> u64 {
        self.sketch.cells().len() as u64 * 32 + self.index.nbits()
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.sketch.cells().len() * 4 + INDEX_PREFIX_LEN + self.index.nbits().div_ceil(8) as usize
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.header().encode(&mut out);
        for c in self.sketch.cells() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.push(self.index.kind() as u8);
        out.extend_from_slice(&self.index.nbits().to_le_bytes());
        out.push(self.index.probes());
        out.extend_from_slice(&self.index.bit_bytes());
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<CompressedGradient> {
        let header = Header::decode(b)?;
        let cfg = header.sketch_config()?;
        let cells_len = cfg.cells().checked_mul(4).ok_or_else(|| Error::Format("sketch too large".into()))?;
        let rest = &b[HEADER_LEN..];
        if rest.len() < cells_len + INDEX_PREFIX_LEN {
            return Err(Error::Format(format!(
                "payload truncated: {} bytes after header, sketch alone needs {cells_len}",
                rest.len()
            )));
        }
        let cells = rest[..cells_len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let sketch = CountSketch::from_cells(cfg, cells)?;

        let idx = &rest[cells_len..];
        let kind = IndexKind::from_code(idx[0])?;
        if kind != header.index_kind {
            return Err(Error::Format("index kind disagrees with header".into()));
        }
        let nbits = u64::from_le_bytes(idx[1..9].try_into().unwrap());
        let probes = idx[9];
        let bits = &idx[INDEX_PREFIX_LEN..];
        if bits.len() as u64 != nbits.div_ceil(8) {
            return Err(Error::Format(format!(
                "index section holds {} bytes, {nbits} bits need {}",
                bits.len(),
                nbits.div_ceil(8)
            )));
        }
        let seed = if kind == IndexKind::Bloom { bloom_seed(header.seed) } else { 0 };
        let index = NzIndex::from_parts(kind, header.n_params, nbits, probes, seed, bits)?;
        Ok(CompressedGradient { sketch, index, dtype: header.dtype, workers: header.workers })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<CompressedGradient> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradient::{gen_synthetic, SparsityProfile, ValueLaw};
    use crate::sketch::map_row;

    fn int_profile(s: f64, seed: u64) -> SparsityProfile {
        SparsityProfile::new(s, seed).with_values(ValueLaw::Integer { bits: 8 })
    }

    #[test]
    fn zero_gradient_compresses_to_nothing() {
        let cfg = SketchConfig::new(8, 16, 3).unwrap();
        let cg = compress(&GradientVector::zeros(100), &cfg, IndexChoice::Bitmap).unwrap();
        assert!(cg.index().is_empty());
        assert!(cg.sketch().is_zero());
    }

    #[test]
    fn index_marks_exactly_the_support() {
        let g = gen_synthetic(1000, &SparsityProfile::new(0.7, 4)).unwrap();
        let cfg = SketchConfig::new(20, 64, 1).unwrap();
        let cg = compress(&g, &cfg, IndexChoice::Bitmap).unwrap();
        let support: Vec<u64> = (0..1000).filter(|&i| g.as_slice()[i as usize] != 0.0).collect();
        assert_eq!(cg.index().candidates(), support);
    }

    #[test]
    fn sketch_matches_per_parameter_definition() {
        // Independent oracle: apply the update rule one parameter at a time in f64.
        let g = gen_synthetic(300, &int_profile(0.5, 8)).unwrap();
        let cfg = SketchConfig::new(7, 32, 12).unwrap();
        let cg = compress(&g, &cfg, IndexChoice::Bitmap).unwrap();
        let mut oracle = vec![0.0f64; cfg.cells()];
        for (p, v) in g.as_slice().iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let (i, t) = (p as u64 / 32, (p % 32) as u64);
            for s in map_row(i, &cfg).0 {
                let col = (t + s.bias as u64) % 32;
                oracle[s.row as usize * 32 + col as usize] += s.sign() as f64 * *v as f64;
            }
        }
        let got: Vec<f64> = cg.sketch().cells().iter().map(|c| *c as f64).collect();
        assert_eq!(got, oracle);
    }

    #[test]
    fn bitmap_payload_size() {
        let cfg = SketchConfig::new(11, 16, 3).unwrap();
        let g = gen_synthetic(1000, &SparsityProfile::new(0.5, 1)).unwrap();
        let cg = compress(&g, &cfg, IndexChoice::Bitmap).unwrap();
        assert_eq!(cg.payload_bits(), 11 * 16 * 32 + 1000);
        assert_eq!(cg.to_bytes().len(), cg.encoded_len());
        assert_eq!(cg.encoded_len(), HEADER_LEN + 11 * 16 * 4 + 10 + 125);
    }

    #[test]
    fn header_layout_is_fixed() {
        let cfg = SketchConfig::new(5, 4, 0x0102_0304_0506_0708).unwrap();
        let g = GradientVector::new(vec![1.0, 0.0, 2.0]).unwrap();
        let b = compress(&g, &cfg, IndexChoice::Bitmap).unwrap().with_dtype(DType::Int32).to_bytes();
        assert_eq!(&b[0..4], b"LHCS");
        assert_eq!(b[4], 0x01);
        assert_eq!(&b[5..13], &3u64.to_le_bytes());
        assert_eq!(&b[13..17], &4u32.to_le_bytes());
        assert_eq!(&b[17..21], &5u32.to_le_bytes());
        assert_eq!(&b[21..29], &0x0102_0304_0506_0708u64.to_le_bytes());
        assert_eq!(b[29], 0x00);
        assert_eq!(b[30], 0x01);
        assert_eq!(&b[31..33], &1u16.to_le_bytes());
        assert_eq!(&b[33..37], &0u32.to_le_bytes());
        let idx = &b[37 + 20 * 4..];
        assert_eq!(idx[0], 0x00);
        assert_eq!(&idx[1..9], &3u64.to_le_bytes());
        assert_eq!(&idx[10..], &[0b101]);
    }

    #[test]
    fn decode_rejects_corruption() {
        let cfg = SketchConfig::new(5, 4, 1).unwrap();
        let g = gen_synthetic(20, &SparsityProfile::new(0.5, 1)).unwrap();
        let b = compress(&g, &cfg, IndexChoice::Bitmap).unwrap().to_bytes();
        assert!(CompressedGradient::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(CompressedGradient::from_bytes(&b[..20]).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(CompressedGradient::from_bytes(&extra).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(CompressedGradient::from_bytes(&bad).is_err());
        let mut bad_kind = b.clone();
        bad_kind[29] = 0x01;
        assert!(CompressedGradient::from_bytes(&bad_kind).is_err());
        let mut nan = b;
        nan[37..41].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(CompressedGradient::from_bytes(&nan).is_err());
    }

    #[test]
    fn merge_with_zero_is_identity() {
        let cfg = SketchConfig::new(30, 16, 9).unwrap();
        let g = gen_synthetic(400, &SparsityProfile::new(0.6, 2)).unwrap();
        let x = compress(&g, &cfg, IndexChoice::Bitmap).unwrap();
        let z = compress(&GradientVector::zeros(400), &cfg, IndexChoice::Bitmap).unwrap();
        let m = x.merge(&z).unwrap();
        assert_eq!(m.sketch(), x.sketch());
        assert_eq!(m.index(), x.index());
        assert_eq!(m.workers(), 2);
    }

    #[test]
    fn merge_rejects_mismatched_headers() {
        let g = gen_synthetic(64, &SparsityProfile::new(0.5, 2)).unwrap();
        let a = compress(&g, &SketchConfig::new(8, 8, 1).unwrap(), IndexChoice::Bitmap).unwrap();
        let b = compress(&g, &SketchConfig::new(8, 8, 2).unwrap(), IndexChoice::Bitmap).unwrap();
        assert!(matches!(a.merge(&b), Err(Error::Incompatible(_))));
        let c = a.clone().with_dtype(DType::Int32);
        assert!(a.merge(&c).is_err());
    }

    #[test]
    fn disjoint_supports_merge_to_compressed_sum() {
        let n = 2048;
        let cfg = SketchConfig::new(40, 32, 5).unwrap();
        let base = gen_synthetic(n, &int_profile(0.5, 6)).unwrap();
        let (mut x1, mut x2) = (vec![0.0f32; n], vec![0.0f32; n]);
        for (p, v) in base.as_slice().iter().enumerate() {
            if p % 3 == 0 { x1[p] = *v } else { x2[p] = *v }
        }
        let (x1, x2) = (GradientVector::new(x1).unwrap(), GradientVector::new(x2).unwrap());
        let merged = compress(&x1, &cfg, IndexChoice::Bitmap)
            .unwrap()
            .merge(&compress(&x2, &cfg, IndexChoice::Bitmap).unwrap())
            .unwrap();
        let direct = compress(&x1.add(&x2).unwrap(), &cfg, IndexChoice::Bitmap).unwrap();
        assert_eq!(merged.index(), direct.index());
        assert_eq!(merged.sketch(), direct.sketch());
    }

    #[test]
    fn auto_index_prefers_bloom_only_when_smaller() {
        assert_eq!(IndexChoice::Auto { expected_nonzeros: None }.resolve(1000, 500, 1.23), IndexChoice::Bitmap);
        match (IndexChoice::Auto { expected_nonzeros: None }).resolve(1_000_000, 1000, 1.23) {
            IndexChoice::Bloom { epsilon, .. } => {
                assert!((epsilon - theory::optimal_epsilon(32, 999.0, 1.23)).abs() < 1e-15)
            }
            other => panic!("expected bloom, got {other:?}"),
        }
    }

    #[test]
    fn bloom_round_trip() {
        let cfg = SketchConfig::new(16, 8, 77).unwrap();
        let g = gen_synthetic(5000, &SparsityProfile::new(0.99, 3)).unwrap();
        let cg = compress(&g, &cfg, IndexChoice::Bloom { epsilon: 0.01, expected_nonzeros: None }).unwrap();
        assert_eq!(cg.header().index_kind, IndexKind::Bloom);
        let back = CompressedGradient::from_bytes(&cg.to_bytes()).unwrap();
        assert_eq!(back, cg);
        for p in 0..5000u64 {
            if g.as_slice()[p as usize] != 0.0 {
                assert!(back.index().query(p).unwrap());
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn bytes_round_trip(
            n in 1usize..600,
            s in 0.0f64..1.0,
            seed: u64,
            c in 1u32..40,
            rows in 3u32..20,
            bloom: bool,
        ) {
            let g = gen_synthetic(n, &SparsityProfile::new(s, seed)).unwrap();
            let cfg = SketchConfig::new(rows, c, seed).unwrap();
            let choice = if bloom { IndexChoice::Bloom { epsilon: 0.05, expected_nonzeros: None } } else { IndexChoice::Bitmap };
            let cg = compress(&g, &cfg, choice).unwrap();
            let bytes = cg.to_bytes();
            proptest::prop_assert_eq!(bytes.len(), cg.encoded_len());
            proptest::prop_assert_eq!(CompressedGradient::from_bytes(&bytes).unwrap(), cg);
        }
    }
}
