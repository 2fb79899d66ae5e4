//! Seed derivation and counter-based random draws.
//!
//! Every random decision in the crate is a pure function of a 64-bit seed and
//! a small key, so results never depend on iteration order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and an ordered list of key words.
pub fn derive(seed: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(mix64(seed), |acc, &k| mix64(acc ^ mix64(k)))
}

/// Derives a child seed keyed by a label (e.g. `"graph"`, `"cascade"`).
pub fn derive_labeled(seed: u64, label: &str, key: &[u64]) -> u64 {
    derive(derive(seed, &[fnv1a(label.as_bytes())]), key)
}

/// Maps 64 random bits to a uniform double in `[0, 1)`.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw for one activation attempt of `parent` on `child` in `round`.
#[inline]
pub fn attempt_uniform(seed: u64, round: u32, parent: usize, child: usize) -> f64 {
    let pair = ((parent as u64) << 32) ^ (child as u64);
    let h = mix64(mix64(seed ^ mix64(round as u64)) ^ mix64(pair.wrapping_mul(GOLDEN)));
    unit_f64(h)
}

/// A seeded stream generator for sequential draws.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 64-bit FNV-1a over bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}
