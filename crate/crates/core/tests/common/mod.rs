#![allow(dead_code)]

use idstab::fixtures::{random_bounds, random_exact};
use idstab::SplineKernelBounds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random model; bounds are narrow enough that most pass the band gates.
pub fn model(seed: u64) -> SplineKernelBounds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=2);
    let degree = rng.random_range(0..=1);
    let knots = rng.random_range(2..=6);
    let h = rng.random_range(0.2..1.0);
    let scale = rng.random_range(0.5..6.0) / (knots as f64 * h).powi(degree as i32 + 1);
    let width = rng.random_range(0.0..0.05) * scale;
    random_bounds(&mut rng, n, degree, knots, h, scale, width)
}

/// Random model with no uncertainty.
pub fn exact_model(seed: u64) -> SplineKernelBounds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=2);
    let degree = rng.random_range(0..=1);
    let knots = rng.random_range(1..=6);
    let h = rng.random_range(0.2..1.0);
    let scale = rng.random_range(0.5..6.0) / (knots as f64 * h).powi(degree as i32 + 1);
    random_exact(&mut rng, n, degree, knots, h, scale)
}
