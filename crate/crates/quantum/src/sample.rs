//! Finite-shot sampling of a measurement distribution.

use crate::state::ProbabilityVector;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Multinomial counts from `n_shots` independent measurements, deterministic
/// for a given seed. Counts always sum to `n_shots`.
pub fn sample_counts(p: &ProbabilityVector, n_shots: u64, rng_seed: u64) -> Result<Vec<u64>> {
    if n_shots == 0 {
        return Err(Error::InvalidDistribution {
            detail: "n_shots must be at least 1".into(),
        });
    }
    let values = p.values();
    let mut cumulative = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for v in values {
        acc += v;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut counts = vec![0u64; values.len()];
    let last = counts.len() - 1;
    for _ in 0..n_shots {
        let r: f64 = rng.gen();
        // first outcome whose cumulative probability exceeds r; rounding in
        // the cumulative sum can leave the total slightly below 1, so clamp
        let idx = cumulative.partition_point(|c| *c <= r).min(last);
        counts[idx] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(len: usize, at: usize) -> ProbabilityVector {
        let mut v = vec![0.0; len];
        v[at] = 1.0;
        ProbabilityVector::new(v).unwrap()
    }

    #[test]
    fn point_mass_collects_all_shots() {
        let counts = sample_counts(&delta(8, 3), 1000, 7).unwrap();
        assert_eq!(counts[3], 1000);
        assert_eq!(counts.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn single_shot_lands_once() {
        let p = ProbabilityVector::new(vec![0.25; 4]).unwrap();
        let counts = sample_counts(&p, 1, 99).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), 1);
        assert_eq!(counts.iter().filter(|c| **c == 1).count(), 1);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let p = ProbabilityVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let a = sample_counts(&p, 10_000, 5).unwrap();
        let b = sample_counts(&p, 10_000, 5).unwrap();
        let c = sample_counts(&p, 10_000, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_shots_is_rejected() {
        assert!(sample_counts(&delta(2, 0), 0, 1).is_err());
    }
}
