//! Random finite fixtures shared by the integration tests.
#![allow(dead_code)]

use fkpm_core::fk::{FiniteModel, Measure};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn probability(rng: &mut impl Rng, k: usize, floor: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| floor + rng.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// A row-stochastic matrix with every entry at least `floor / (k (1 + floor))`.
pub fn stochastic(rng: &mut impl Rng, k: usize, floor: f64) -> DMatrix<f64> {
    let rows: Vec<f64> = (0..k).flat_map(|_| probability(rng, k, floor)).collect();
    DMatrix::from_row_slice(k, k, &rows)
}

/// A kernel moving only to `x` and `x + 1 mod k`: not H_1 for `k > 2`, but `k - 1` steps mix.
pub fn lazy_cycle(rng: &mut impl Rng, k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for x in 0..k {
        let stay = 0.2 + 0.6 * rng.random::<f64>();
        m[(x, x)] += stay;
        m[(x, (x + 1) % k)] += 1.0 - stay;
    }
    m
}

pub fn potential(rng: &mut impl Rng, k: usize, low: f64) -> Vec<f64> {
    (0..k).map(|_| low + (1.0 - low) * rng.random::<f64>()).collect()
}

/// Time-inhomogeneous model with strictly positive kernels and potentials in `[low, 1]`.
pub fn random_model(seed: u64, k: usize, horizon: usize, low: f64) -> FiniteModel {
    let mut r = rng(seed);
    let eta0 = Measure::probability(probability(&mut r, k, 0.1)).unwrap();
    let kernels = (0..horizon).map(|_| stochastic(&mut r, k, 0.2)).collect();
    let potentials = (0..=horizon).map(|_| potential(&mut r, k, low)).collect();
    FiniteModel::new(eta0, kernels, potentials).unwrap()
}

/// Model whose kernels only mix after `k - 1` steps.
pub fn cycle_model(seed: u64, k: usize, horizon: usize, low: f64) -> FiniteModel {
    let mut r = rng(seed);
    let eta0 = Measure::probability(probability(&mut r, k, 0.1)).unwrap();
    let kernels = (0..horizon).map(|_| lazy_cycle(&mut r, k)).collect();
    let potentials = (0..=horizon).map(|_| potential(&mut r, k, low)).collect();
    FiniteModel::new(eta0, kernels, potentials).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
