//! Seed derivation helpers.
//!
//! Per-item RNG streams are derived by mixing (seed, index) so that
//! generation order and worker count never affect content.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche for seed derivation.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Independent RNG for item `index` under a corpus-level `seed`.
pub fn derive_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(seed ^ splitmix64(index.wrapping_add(0x517c_c1b7_2722_0a95)));
    ChaCha8Rng::seed_from_u64(mixed)
}
