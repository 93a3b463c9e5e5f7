//! Seeded randomness shared by the trainers.
//!
//! Every random decision is drawn from a ChaCha stream derived from the run
//! seed and the decision's coordinates (epoch, example), never from a
//! generator shared across threads, so results do not depend on scheduling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// SplitMix64 finalizer over the combined inputs.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, a, b))
}

/// Fills `values` with draws from N(0, std²).
pub fn fill_gaussian(values: &mut [f64], std: f64, rng: &mut ChaCha8Rng) {
    let normal = Normal::new(0.0, std).expect("finite, non-negative std");
    for v in values {
        *v = normal.sample(rng);
    }
}

/// A uniformly shuffled `0..n`.
pub fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        assert_eq!(mix_seed(1, 2, 3), mix_seed(1, 2, 3));
        assert_ne!(mix_seed(1, 2, 3), mix_seed(1, 3, 2));
        let a = permutation(50, &mut rng_for(7, 0, 0));
        let b = permutation(50, &mut rng_for(7, 0, 0));
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn gaussian_has_requested_scale() {
        let mut v = vec![0.0; 20_000];
        fill_gaussian(&mut v, 0.01, &mut rng_for(1, 0, 0));
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 5e-4);
        assert!((var.sqrt() - 0.01).abs() < 5e-4);
    }
}
