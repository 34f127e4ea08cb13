//! Deterministic sample generation for verdicts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const DEFAULT_BASE_POINTS: usize = 32;
pub const DEFAULT_FIBER_POINTS: usize = 8;
pub const DEFAULT_FIBER_RADIUS: f64 = 1.0;
/// Threshold for "vanishes" verdicts.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Threshold for implications that compare two independent numeric pipelines.
pub const DEFAULT_CROSS_TOL: f64 = 1e-7;
pub const DEFAULT_SEED: u64 = 42;

/// Sample counts and tolerances shared by every verdict of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSettings {
    pub points: usize,
    pub fiber_points: usize,
    pub fiber_radius: f64,
    pub tol: f64,
    pub cross_tol: f64,
    pub seed: u64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            points: DEFAULT_BASE_POINTS,
            fiber_points: DEFAULT_FIBER_POINTS,
            fiber_radius: DEFAULT_FIBER_RADIUS,
            tol: DEFAULT_TOL,
            cross_tol: DEFAULT_CROSS_TOL,
            seed: DEFAULT_SEED,
        }
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut scale = 1.0 / base as f64;
    while index > 0 {
        result += (index % base) as f64 * scale;
        index /= base;
        scale /= base as f64;
    }
    result
}

/// `count` Halton points in the box, shifted by a seeded Cranley–Patterson rotation.
pub fn sample_points(sample_box: &[[f64; 2]], count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(sample_box.len() <= PRIMES.len(), "dimension too large for Halton sampling");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = sample_box.iter().map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|index| {
            sample_box
                .iter()
                .enumerate()
                .map(|(d, [lo, hi])| {
                    let u = (radical_inverse(index, PRIMES[d]) + shift[d]).fract();
                    lo + u * (hi - lo)
                })
                .collect()
        })
        .collect()
}

/// `count` fiber vectors drawn uniformly from the closed ball of `radius`.
pub fn fiber_samples(dim: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm2: f64 = v.iter().map(|c| c * c).sum();
        if norm2 <= 1.0 {
            out.push(v.into_iter().map(|c| c * radius).collect());
        }
    }
    out
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}
