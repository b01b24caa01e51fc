//! Reproducible seeding.
//!
//! Every random draw in a study descends from one master seed through a
//! path of integer labels, e.g. `(master, NOISE, location, draw, snr)`.
//! Each label is folded in with a SplitMix64 step, so a sub-seed depends
//! only on its path and never on the order in which trials run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Label for per-trial source locations.
pub const STREAM_LOCATION: u64 = 1;
/// Label for additive noise draws.
pub const STREAM_NOISE: u64 = 2;
/// Label for projection (encoder) draws.
pub const STREAM_ENCODER: u64 = 3;
/// Label for MVDR snapshot draws.
pub const STREAM_SNAPSHOT: u64 = 4;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the sub-seed at `path` below `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
