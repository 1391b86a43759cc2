//! Deterministic stratified subsampling.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Dataset, Error, Result};

/// Draws `n` samples preserving the class proportions of the source as
/// closely as integer counts allow (floor quotas, remainder spread over the
/// lowest class indices with spare samples). Deterministic for a given seed.
pub fn subset(dataset: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n > dataset.len() {
        return Err(Error::SubsetTooLarge {
            n,
            available: dataset.len(),
        });
    }
    if n == 0 {
        return Err(Error::Invalid {
            detail: "subset size must be at least 1".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); 10];
    for i in 0..dataset.len() {
        by_class[dataset.label(i) as usize].push(i);
    }
    let total = dataset.len();
    let mut quotas: Vec<usize> = by_class
        .iter()
        .map(|idxs| idxs.len() * n / total)
        .collect();
    let mut assigned: usize = quotas.iter().sum();
    let mut class = 0;
    while assigned < n {
        if quotas[class] < by_class[class].len() {
            quotas[class] += 1;
            assigned += 1;
        }
        class = (class + 1) % 10;
    }

    let mut chosen = Vec::with_capacity(n);
    for (class, idxs) in by_class.iter().enumerate() {
        let mut pool = idxs.clone();
        pool.shuffle(&mut rng);
        chosen.extend_from_slice(&pool[..quotas[class]]);
    }
    chosen.shuffle(&mut rng);

    let (pixels, labels) = dataset.gather(&chosen);
    let (c, h, w) = dataset.sample_dims();
    Dataset::new(
        pixels,
        c,
        h,
        w,
        labels.into_iter().map(|l| l as u8).collect(),
        dataset.split(),
    )
}
