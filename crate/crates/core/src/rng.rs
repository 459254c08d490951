//! Seeded randomness. Every stochastic step in the crate draws from a
//! [`Rng`] derived from an explicit seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;

pub type Rng = rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent stream for a named purpose, so adding draws to one stage
/// does not shift the draws of another.
pub fn substream(seed: u64, purpose: &str) -> Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    rng(seed ^ h.rotate_left(17))
}

/// Permutation of `0..n` determined by `seed`.
pub fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    idx
}
