//! Seed handling. Every random stream in the crate is a ChaCha8 generator
//! whose seed is derived from a root seed with SplitMix64, so that per-tree
//! or per-split streams are independent of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// One SplitMix64 step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child stream of `root`.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(index.wrapping_add(1)))
}

/// Seed for a child stream keyed by a string (split keys, feature names).
pub fn derive_seed_str(root: u64, key: &str) -> u64 {
    // FNV-1a keeps this independent of std's randomized hasher.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive_seed(root, h)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
