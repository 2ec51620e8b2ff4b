//! Per-trial random number generation.
//!
//! Every stochastic operation takes an explicit `&mut TrialRng`. Trials get
//! their generator from a `(master seed, stream)` pair so that parallel and
//! serial schedules draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Counter-based generator used everywhere in the gym.
pub type TrialRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream index into an independent child seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Generator for `stream` of the trial seeded with `master`.
pub fn rng_for(master: u64, stream: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}
