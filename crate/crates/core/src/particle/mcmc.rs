use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::engine::{mutation_step, ParticlePopulation};
use crate::error::{Error, Result};
use crate::fk::{cumulative, sample_cumulative, FeynmanKac, FiniteModel, Measure};
use crate::rng::{Purpose, RngStream};

/// Stationarity tolerance for `eta_n K_n = eta_n`.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// An extra Markov move `K_n` applied after the mutation `M_n`.
pub trait McmcKernel<S>: Sync {
    fn sample(&self, n: usize, x: &S, rng: &mut ChaCha8Rng) -> S;
}

/// Finite-space MCMC moves, checked against the exact flow at construction.
#[derive(Debug, Clone)]
pub struct FiniteMcmc {
    cum: BTreeMap<usize, Vec<Vec<f64>>>,
}

/// `max_y |(eta K)(y) - eta(y)|`.
pub fn stationarity_defect(eta: &Measure, k: &DMatrix<f64>) -> f64 {
    let eta_v = DVector::from_column_slice(eta.weights());
    let pushed = eta_v.transpose() * k;
    pushed.iter().zip(eta.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

impl FiniteMcmc {
    /// `kernels[n] = K_n`; each must leave the exact `eta_n` of `model` invariant.
    pub fn new(model: &FiniteModel, kernels: BTreeMap<usize, DMatrix<f64>>) -> Result<Self> {
        let horizon = kernels.keys().copied().max().unwrap_or(0);
        let flow = model.flow_exact(horizon)?;
        let k = model.num_states();
        let mut cum = BTreeMap::new();
        for (n, kn) in kernels {
            if kn.nrows() != k || kn.ncols() != k {
                return Err(Error::InvalidModel(format!("MCMC kernel K_{n} has the wrong shape")));
            }
            let defect = stationarity_defect(&flow[n], &kn);
            if defect > STATIONARITY_TOL {
                return Err(Error::StationarityViolated { defect });
            }
            cum.insert(n, (0..k).map(|r| cumulative(kn.row(r).iter().copied())).collect());
        }
        Ok(Self { cum })
    }
}

impl McmcKernel<usize> for FiniteMcmc {
    fn sample(&self, n: usize, x: &usize, rng: &mut ChaCha8Rng) -> usize {
        match self.cum.get(&n) {
            Some(rows) => sample_cumulative(&rows[*x], rng.random()),
            None => *x,
        }
    }
}

/// Mutation by `M'_{n+1} = M_{n+1} K_{n+1}`.
pub fn mcmc_regularized_mutation<M, K>(
    model: &M,
    selected: &ParticlePopulation<M::State>,
    kernel: &K,
    stream: &RngStream,
) -> ParticlePopulation<M::State>
where
    M: FeynmanKac,
    K: McmcKernel<M::State>,
{
    let mut moved = mutation_step(model, selected, stream);
    let n = moved.time;
    moved.states = moved
        .states
        .par_iter()
        .enumerate()
        .map(|(i, x)| kernel.sample(n, x, &mut stream.stream(n, i, Purpose::Mcmc)))
        .collect();
    moved
}
