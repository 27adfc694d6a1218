//! Seed derivation and the random streams used throughout the crate.
//!
//! Every random artifact is produced by a [`Xoshiro256PlusPlus`] stream seeded
//! from a 64-bit value. Child seeds are derived by folding a list of words into
//! the parent seed with the SplitMix64 finalizer:
//!
//! ```text
//! h = splitmix64(parent)
//! for w in words: h = splitmix64(h ^ splitmix64(w))
//! ```
//!
//! so adding new words (grid points, trials, measurement indices) never
//! perturbs the streams already in use.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Stream = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function applied to `x + golden`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(parent), |h, &w| splitmix64(h ^ splitmix64(w)))
}

pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

pub fn fill_standard_normal(rng: &mut Stream, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}
