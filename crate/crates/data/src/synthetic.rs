//! Class-conditioned Gaussian blobs on an 8x8 canvas: each class gets a
//! distinct blob center on a circle, so the classes are linearly separable
//! by construction; mild pixel noise keeps the task nontrivial.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Dataset, Error, Result, Split};

const SIDE: usize = 8;
const BLOB_SIGMA: f64 = 1.1;
const NOISE_SIGMA: f64 = 0.05;

/// `n` samples over `classes` balanced labels (round-robin), deterministic
/// for a given seed.
pub fn synthetic(n: usize, classes: usize, seed: u64) -> Result<Dataset> {
    if classes < 2 || classes > 10 {
        return Err(Error::Invalid {
            detail: format!("synthetic classes must be in 2..=10, got {classes}"),
        });
    }
    if n == 0 {
        return Err(Error::Invalid {
            detail: "synthetic dataset needs at least one sample".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let centers: Vec<(f64, f64)> = (0..classes)
        .map(|c| {
            let angle = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
            (3.5 + 2.2 * angle.cos(), 3.5 + 2.2 * angle.sin())
        })
        .collect();
    let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        let (cx, cy) = centers[class];
        for y in 0..SIDE {
            for x in 0..SIDE {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let v = (-d2 / (2.0 * BLOB_SIGMA * BLOB_SIGMA)).exp()
                    + noise.sample(&mut rng);
                pixels.push(v.clamp(0.0, 1.0));
            }
        }
        labels.push(class as u8);
    }
    Dataset::new(pixels, 1, SIDE, SIDE, labels, Split::Train)
}
