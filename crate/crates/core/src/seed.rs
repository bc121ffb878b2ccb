//! Seed derivation shared by every seeded component.
//!
//! A child seed depends only on `(parent, index)`, so work units can run in
//! any order or on any thread and still see the same random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named sub-streams so unrelated consumers of one master seed never collide.
pub(crate) mod stream {
    pub const ENSEMBLE: u64 = 0x454E_5345_4D42_4C45;
    pub const TRIALS: u64 = 0x5452_4941_4C53_0000;
    pub const GAUGES: u64 = 0x4741_5547_4553_0000;
}
