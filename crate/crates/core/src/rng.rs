//! Seeded randomness.
//!
//! Every random draw in the crate goes through [`Rng`], a ChaCha8 stream
//! cipher generator (counter based, identical output on every platform). Seeds
//! are threaded explicitly; nothing reads global or OS entropy.
//!
//! Derived seeds are produced by [`mix_seed`], which folds a list of `u64`
//! words through the SplitMix64 finalizer. String identifiers enter the mix via
//! [`id_hash`] (64-bit FNV-1a), which is stable across builds unlike
//! `std::hash::DefaultHasher`.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines seed words into one seed. Order matters.
pub fn mix_seed(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// 64-bit FNV-1a of a string.
pub fn id_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Draws an index from a sparse categorical distribution given as
/// `(index, probability)` pairs. Falls back to the last entry when rounding
/// leaves the cumulative sum just short of the uniform draw.
pub fn sample_sparse(rng: &mut Rng, entries: &[(usize, f64)]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(idx, p) in entries {
        acc += p;
        if u < acc {
            return idx;
        }
    }
    entries.last().map(|&(idx, _)| idx).expect("empty distribution")
}

/// Draws an index from a dense probability vector.
pub fn sample_dense(rng: &mut Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (idx, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = idx;
            if u < acc {
                return idx;
            }
        }
    }
    last
}
