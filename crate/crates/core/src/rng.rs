//! Counter-based seed derivation.
//!
//! Every stochastic unit of work (one trajectory, one sweep point) gets its
//! own ChaCha stream keyed by the run's base seed and selected by the unit's
//! index, so results do not depend on how work is spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for work item `index` of a run seeded with `base_seed`.
pub fn stream(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// Stable 64-bit identifier of `(base_seed, index)`, reported in output tables.
pub fn derived_seed(base_seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = base_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
