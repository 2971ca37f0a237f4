//! Seeded randomness helpers. Every stochastic step in the crate draws from a
//! ChaCha stream derived from a caller seed so that runs are bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task (tree index, fold, round...).
pub fn derived(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng
}
