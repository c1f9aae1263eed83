//! Seed derivation: all randomness flows from one 64-bit root seed through
//! named streams, so any single instance is regenerable in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derives a child seed from `(root, label, index)`. The label names the
/// pipeline component ("instance", "teacher", ...), the index the item.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let mut h = root ^ 0x5851f42d4c957f2d;
    for b in label.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ index)
}

/// A deterministic RNG for the named stream.
pub fn rng_for(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label, index))
}
