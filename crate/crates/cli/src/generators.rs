//! Built-in seeded data generators with known ground truth, so experiments
//! and tests run offline.

use bayesid::data::TimeSeriesDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Linear ARX process driven by unit-variance Gaussian input:
///
/// `y(t) = Σᵢ a[i]·y(t−1−i) + Σⱼ b[j]·u(t−1−j) + noise_std·e(t)`.
///
/// The default coefficients `a = [1.2, −0.5]`, `b = [0.5, 0.25]` give a
/// stable second-order system (pole radius ≈ 0.71).
pub fn arx(samples: usize, seed: u64, noise_std: f64, a: &[f64], b: &[f64]) -> TimeSeriesDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: Vec<f64> = Vec::with_capacity(samples);
    let mut y: Vec<f64> = Vec::with_capacity(samples);
    for t in 0..samples {
        u.push(StandardNormal.sample(&mut rng));
        let e: f64 = StandardNormal.sample(&mut rng);
        let mut v = noise_std * e;
        for (i, &ai) in a.iter().enumerate() {
            if t > i {
                v += ai * y[t - 1 - i];
            }
        }
        for (j, &bj) in b.iter().enumerate() {
            if t > j {
                v += bj * u[t - 1 - j];
            }
        }
        y.push(v);
    }
    TimeSeriesDataset::from_channels(u, y)
}

/// Two-tank-like nonlinear recursion: the input pumps into an upper tank,
/// which drains into a lower tank whose level is measured. Square-root
/// outflows make the dynamics genuinely nonlinear; the input is a random
/// staircase so both tanks keep moving.
///
/// `x₁ ← x₁ + Δ(k₁u² − k₂√x₁)`, `x₂ ← x₂ + Δ(k₂√x₁ − k₃√x₂)`,
/// `y = x₂ + noise`.
pub fn tanks(samples: usize, seed: u64, noise_std: f64) -> TimeSeriesDataset {
    const DT: f64 = 0.5;
    const K1: f64 = 0.5;
    const K2: f64 = 0.25;
    const K3: f64 = 0.2;
    const HOLD: usize = 20;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: Vec<f64> = Vec::with_capacity(samples);
    let mut y: Vec<f64> = Vec::with_capacity(samples);
    let (mut x1, mut x2) = (0.5_f64, 0.5_f64);
    let mut level = 0.0;
    for t in 0..samples {
        if t % HOLD == 0 {
            level = rng.random_range(0.0..1.0);
        }
        u.push(level);
        x1 = (x1 + DT * (K1 * level * level - K2 * x1.max(0.0).sqrt())).max(0.0);
        x2 = (x2 + DT * (K2 * x1.max(0.0).sqrt() - K3 * x2.max(0.0).sqrt())).max(0.0);
        let e: f64 = StandardNormal.sample(&mut rng);
        y.push(x2 + noise_std * e);
    }
    TimeSeriesDataset::from_channels(u, y)
}
