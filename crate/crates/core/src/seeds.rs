//! Deterministic derivation of per-task RNG streams from one root seed.
//!
//! Parallel code in this crate never shares an RNG. Each independent work
//! item (map cell, noise realization, bootstrap replica, ...) derives its own
//! seed as `child_seed(root, index)` and builds a ChaCha8 stream from it, so
//! results are identical for any thread count and iteration order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche, cheap, stable across platforms.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed for child stream `index` of `root`.
pub fn child_seed(root: u64, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(index.wrapping_add(1)))
}

/// Build the deterministic RNG used throughout the crate.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Convenience: RNG for child stream `index` of `root`.
pub fn child_rng(root: u64, index: u64) -> ChaCha8Rng {
    rng_from(child_seed(root, index))
}
