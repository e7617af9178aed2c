//! Seeded 64-bit mixing shared by the sketch row mapping and the Bloom probes.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed, a key and a salt into one well-distributed word.
#[inline]
pub fn hash3(seed: u64, key: u64, salt: u64) -> u64 {
    mix64(mix64(seed ^ key.wrapping_mul(GOLDEN)) ^ salt.wrapping_add(GOLDEN).wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Maps a 32-bit word uniformly onto `[0, range)` without division.
#[inline]
pub fn reduce32(word: u32, range: u32) -> u32 {
    ((word as u64 * range as u64) >> 32) as u32
}
