//! Seeded, counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream identified by a
//! `(seed, stream)` pair, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids for independent consumers sharing one user seed.
pub mod streams {
    pub const CODE: u64 = 0x10;
    pub const SOURCE: u64 = 0x20;
    pub const DECIMATE: u64 = 0x30;
    pub const TAU: u64 = 0x31;
    pub const BEQ: u64 = 0x40;
    pub const TCQ: u64 = 0x50;
}

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Seed of block `index` under a run seed; a pure function of its inputs.
pub fn block_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
