//! Deterministic RNG derivation.
//!
//! Every stochastic task derives a private stream from a master seed plus its
//! own coordinates (user index, trial, iteration, ...). Results are therefore
//! independent of scheduling and worker counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for seed mixing.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapse a master seed and task coordinates into one 64-bit stream seed.
pub fn stream_seed(master: u64, coords: &[u64]) -> u64 {
    let mut acc = mix64(master);
    for &c in coords {
        acc = mix64(acc ^ c);
    }
    acc
}

/// Seeded generator for one task.
pub fn stream_rng(master: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, coords))
}
