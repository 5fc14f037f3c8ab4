//! Per-trajectory random streams.
//!
//! Each trajectory draws from ChaCha8 keyed by the master seed, on the
//! stream selected by its index. Streams are independent and addressable
//! without generating any of the others, so an ensemble produces the same
//! numbers no matter how trajectories are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrajRng = ChaCha8Rng;

/// Random stream for trajectory `index` under `master`.
pub fn trajectory_rng(master: u64, index: u64) -> TrajRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Seed for an independent family of streams, e.g. the second ensemble of a
/// two-ensemble computation. SplitMix64 finalizer over `master ^ tag`.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
