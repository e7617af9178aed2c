//! Non-zero index: an exact bitmap or a Bloom filter, both merged by OR.

use crate::error::{Error, Result};
use crate::hash::{hash3, mix64};
use crate::theory;

const BLOOM_SALT_A: u64 = 0x626c_6f6f_6d41;
const BLOOM_SALT_B: u64 = 0x626c_6f6f_6d42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum IndexKind {
    Bitmap = 0x00,
    Bloom = 0x01,
}

impl IndexKind {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0x00 => Ok(IndexKind::Bitmap),
            0x01 => Ok(IndexKind::Bloom),
            other => Err(Error::Format(format!("unknown index kind {other:#04x}"))),
        }
    }
}

/// Marks which of `len` positions may hold a non-zero value.
///
/// The bitmap is exact. The Bloom filter may claim extra positions but never
/// misses a marked one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NzIndex {
    kind: IndexKind,
    len: u64,
    nbits: u64,
    probes: u8,
    seed: u64,
    words: Vec<u64>,
}

impl NzIndex {
    pub fn bitmap(len: u64) -> Self {
        Self { kind: IndexKind::Bitmap, len, nbits: len, probes: 0, seed: 0, words: vec![0; words_for(len)] }
    }

    /// Bloom filter sized for `expected` non-zeros at false-positive rate `epsilon`.
    pub fn bloom(len: u64, expected: u64, epsilon: f64, seed: u64) -> Result<Self> {
        let nbits = theory::bloom_size_bits(expected.max(1), epsilon)?;
        let probes = theory::bloom_probes(epsilon)?;
        Ok(Self::bloom_with_shape(len, nbits, probes, seed))
    }

    pub fn bloom_with_shape(len: u64, nbits: u64, probes: u8, seed: u64) -> Self {
        Self { kind: IndexKind::Bloom, len, nbits, probes, seed, words: vec![0; words_for(nbits)] }
    }

    pub fn kind(&self) -> IndexKind {
        self.kind
    }

    /// Number of positions covered (the parameter count).
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn nbits(&self) -> u64 {
        self.nbits
    }

    pub fn probes(&self) -> u8 {
        self.probes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn check(&self, i: u64) -> Result<()> {
        if i >= self.len {
            return Err(Error::OutOfRange { position: i, len: self.len });
        }
        Ok(())
    }

    pub fn mark_nonzero(&mut self, i: u64) -> Result<()> {
        self.check(i)?;
        match self.kind {
            IndexKind::Bitmap => set_bit(&mut self.words, i),
            IndexKind::Bloom => {
                if self.nbits == 0 {
                    return Ok(());
                }
                let (nbits, words) = (self.nbits, &mut self.words);
                for_each_probe(self.seed, i, nbits, self.probes, |b| set_bit(words, b));
            }
        }
        Ok(())
    }

    pub fn query(&self, i: u64) -> Result<bool> {
        self.check(i)?;
        Ok(self.query_unchecked(i))
    }

    #[inline]
    pub(crate) fn query_unchecked(&self, i: u64) -> bool {
        match self.kind {
            IndexKind::Bitmap => get_bit(&self.words, i),
            IndexKind::Bloom => {
                // An empty filter (epsilon = 1) claims every position.
                if self.nbits == 0 {
                    return true;
                }
                let mut all = true;
                for_each_probe(self.seed, i, self.nbits, self.probes, |b| all &= get_bit(&self.words, b));
                all
            }
        }
    }

    /// Positions the index claims, ascending.
    pub fn candidates(&self) -> Vec<u64> {
        match self.kind {
            IndexKind::Bitmap => {
                let mut out = Vec::new();
                for (w, &word) in self.words.iter().enumerate() {
                    let mut bits = word;
                    while bits != 0 {
                        out.push(w as u64 * 64 + bits.trailing_zeros() as u64);
                        bits &= bits - 1;
                    }
                }
                out
            }
            IndexKind::Bloom => (0..self.len).filter(|&i| self.query_unchecked(i)).collect(),
        }
    }

    pub fn same_shape(&self, other: &NzIndex) -> bool {
        self.kind == other.kind
            && self.len == other.len
            && self.nbits == other.nbits
            && self.probes == other.probes
            && self.seed == other.seed
    }

    pub fn merge_or(&self, other: &NzIndex) -> Result<NzIndex> {
        let mut out = self.clone();
        out.merge_into(other)?;
        Ok(out)
    }

    pub fn merge_into(&mut self, other: &NzIndex) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Incompatible(format!(
                "index shapes differ: {:?}/{} bits vs {:?}/{} bits",
                self.kind, self.nbits, other.kind, other.nbits
            )));
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
        Ok(())
    }

    /// Raw bits, little-endian, `ceil(nbits / 8)` bytes.
    pub fn bit_bytes(&self) -> Vec<u8> {
        let nbytes = self.nbits.div_ceil(8) as usize;
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(nbytes);
        out
    }

    pub(crate) fn from_parts(
        kind: IndexKind,
        len: u64,
        nbits: u64,
        probes: u8,
        seed: u64,
        bytes: &[u8],
    ) -> Result<Self> {
        if kind == IndexKind::Bitmap && nbits != len {
            return Err(Error::Format(format!("bitmap has {nbits} bits for {len} positions")));
        }
        if bytes.len() as u64 != nbits.div_ceil(8) {
            return Err(Error::Format(format!("index needs {} bytes, found {}", nbits.div_ceil(8), bytes.len())));
        }
        let mut words = vec![0u64; words_for(nbits)];
        for (k, chunk) in bytes.chunks(8).enumerate() {
            let mut w = [0u8; 8];
            w[..chunk.len()].copy_from_slice(chunk);
            words[k] = u64::from_le_bytes(w);
        }
        if !nbits.is_multiple_of(64) {
            if let Some(last) = words.last() {
                if last >> (nbits % 64) != 0 {
                    return Err(Error::Format("index has bits set past its length".into()));
                }
            }
        }
        Ok(Self { kind, len, nbits, probes, seed, words })
    }
}

fn words_for(bits: u64) -> usize {
    bits.div_ceil(64) as usize
}

#[inline]
fn set_bit(words: &mut [u64], b: u64) {
    words[(b / 64) as usize] |= 1 << (b % 64);
}

#[inline]
fn get_bit(words: &[u64], b: u64) -> bool {
    words[(b / 64) as usize] >> (b % 64) & 1 == 1
}

/// Double hashing: probe `t` is `(b1 + t * b2) mod nbits`.
#[inline]
fn for_each_probe(seed: u64, i: u64, nbits: u64, probes: u8, mut f: impl FnMut(u64)) {
    let b1 = hash3(seed, i, BLOOM_SALT_A) % nbits;
    let b2 = if nbits > 1 { 1 + mix64(hash3(seed, i, BLOOM_SALT_B)) % (nbits - 1) } else { 0 };
    let mut b = b1;
    for _ in 0..probes {
        f(b);
        b = ((b as u128 + b2 as u128) % nbits as u128) as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_bitmap_marks_one_bit() {
        let mut idx = NzIndex::bitmap(10);
        idx.mark_nonzero(3).unwrap();
        assert_eq!(idx.candidates(), vec![3]);
        for i in 0..10 {
            assert_eq!(idx.query(i).unwrap(), i == 3);
        }
    }

    #[test]
    fn marking_is_idempotent() {
        for mut idx in [NzIndex::bitmap(100), NzIndex::bloom(100, 10, 0.01, 3).unwrap()] {
            idx.mark_nonzero(42).unwrap();
            let once = idx.clone();
            idx.mark_nonzero(42).unwrap();
            assert_eq!(idx, once);
        }
    }

    #[test]
    fn out_of_range_positions() {
        let mut idx = NzIndex::bitmap(4);
        assert!(matches!(idx.mark_nonzero(4), Err(Error::OutOfRange { .. })));
        assert!(idx.query(9).is_err());
    }

    #[test]
    fn empty_index_claims_nothing() {
        let idx = NzIndex::bitmap(70);
        assert!((0..70).all(|i| !idx.query(i).unwrap()));
        let bloom = NzIndex::bloom(1000, 100, 0.01, 1).unwrap();
        assert!((0..1000).all(|i| !bloom.query(i).unwrap()));
    }

    #[test]
    fn degenerate_bloom_claims_everything() {
        let idx = NzIndex::bloom(16, 8, 1.0, 1).unwrap();
        assert_eq!(idx.nbits(), 0);
        assert!((0..16).all(|i| idx.query(i).unwrap()));
    }

    #[test]
    fn bloom_has_no_false_negatives_small() {
        for seed in 0..20 {
            let mut idx = NzIndex::bloom(512, 40, 0.05, seed).unwrap();
            let marked: Vec<u64> = (0..40).map(|k| (k * 13 + seed) % 512).collect();
            for &m in &marked {
                idx.mark_nonzero(m).unwrap();
            }
            for &m in &marked {
                assert!(idx.query(m).unwrap());
            }
        }
    }

    #[test]
    fn merge_or_identity_and_mismatch() {
        let mut a = NzIndex::bitmap(130);
        a.mark_nonzero(129).unwrap();
        let empty = NzIndex::bitmap(130);
        assert_eq!(a.merge_or(&empty).unwrap(), a);
        assert!(a.merge_or(&NzIndex::bitmap(131)).is_err());
        let bloom = NzIndex::bloom(130, 4, 0.1, 0).unwrap();
        assert!(a.merge_or(&bloom).is_err());
    }

    #[test]
    fn bytes_round_trip_and_reject_stray_bits() {
        let mut a = NzIndex::bitmap(13);
        a.mark_nonzero(0).unwrap();
        a.mark_nonzero(12).unwrap();
        let bytes = a.bit_bytes();
        assert_eq!(bytes, vec![0x01, 0x10]);
        let b = NzIndex::from_parts(IndexKind::Bitmap, 13, 13, 0, 0, &bytes).unwrap();
        assert_eq!(a, b);
        assert!(NzIndex::from_parts(IndexKind::Bitmap, 13, 13, 0, 0, &[0x01, 0x20]).is_err());
        assert!(NzIndex::from_parts(IndexKind::Bitmap, 13, 13, 0, 0, &[0x01]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn or_matches_union_of_supports(
            a in proptest::collection::btree_set(0u64..300, 0..60),
            b in proptest::collection::btree_set(0u64..300, 0..60),
            bloom: bool,
        ) {
            let fresh = || if bloom { NzIndex::bloom(300, 64, 0.02, 5).unwrap() } else { NzIndex::bitmap(300) };
            let (mut ia, mut ib, mut iu) = (fresh(), fresh(), fresh());
            for &x in &a { ia.mark_nonzero(x).unwrap(); iu.mark_nonzero(x).unwrap(); }
            for &x in &b { ib.mark_nonzero(x).unwrap(); iu.mark_nonzero(x).unwrap(); }
            let merged = ia.merge_or(&ib).unwrap();
            proptest::prop_assert_eq!(&merged, &iu);
            proptest::prop_assert_eq!(&merged, &ib.merge_or(&ia).unwrap());
            proptest::prop_assert_eq!(&merged.merge_or(&merged).unwrap(), &merged);
            for &x in a.iter().chain(&b) {
                proptest::prop_assert!(merged.query(x).unwrap());
            }
        }
    }
}
