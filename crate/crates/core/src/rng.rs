//! Deterministic random streams.
//!
//! Every stochastic step draws from its own stream derived from a root seed
//! and a pair of integer labels, so results never depend on call order across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used by every simulator and sampler in the crate.
pub type SimRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with two labels into an independent child seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}

pub fn rng_from(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn child_rng(seed: u64, stream: u64, index: u64) -> SimRng {
    rng_from(derive_seed(seed, stream, index))
}

/// Stream labels used across the crate.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const RESAMPLE: u64 = 2;
    pub const DESIGN: u64 = 3;
    pub const SURROGATE: u64 = 4;
    pub const MARGINAL: u64 = 5;
    pub const PARTICIPANT: u64 = 6;
    pub const RESPONSE: u64 = 7;
    pub const METRIC_DESIGNS: u64 = 8;
    pub const METRIC_REPS: u64 = 9;
    pub const ACQUISITION: u64 = 10;
    pub const UTILITY: u64 = 11;
}
