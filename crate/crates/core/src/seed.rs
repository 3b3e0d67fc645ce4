//! Seed derivation so every stochastic step of a run can be replayed from
//! `(run seed, iteration, purpose)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep the random streams of different pipeline stages apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Prune = 1,
    Acquire = 2,
    Train = 3,
    Synth = 4,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive(seed: u64, iteration: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(iteration)) ^ stream as u64)
}

pub fn rng(seed: u64, iteration: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, iteration, stream))
}
