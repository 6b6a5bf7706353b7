//! Seeded randomness. Every stream derives from one user seed plus a fixed
//! offset, so no two stages share a generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Sub-seed offsets.
pub const SPLIT: u64 = 0;
pub const INIT: u64 = 1;
pub const POOL: u64 = 2;
pub const SHUFFLE: u64 = 3;
pub const SUITE: u64 = 4;
pub const SYNTH: u64 = 5;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, offset: u64) -> Rng {
    seeded(seed.wrapping_add(offset))
}

/// Standard normal draw.
pub fn normal(rng: &mut impl rand::Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}
