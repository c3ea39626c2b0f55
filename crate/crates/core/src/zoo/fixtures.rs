use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    absorption_doob, finite_hmm, geometric_clock_discretization, self_avoiding_walk, simulated_annealing, subset_restriction,
    DoobAnalysis, LinearGaussian, SelfAvoidingWalk, ZooModel,
};
use crate::error::{Error, Result};
use crate::fk::{FiniteModel, Measure};
use crate::semigroup::MixingCertificate;

/// A named fixture and whether it has a finite-state JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub emittable: bool,
}

const CATALOG: [CatalogEntry; 8] = [
    CatalogEntry { name: "hmm4", description: "4-state hidden Markov model, 11 observations", emittable: true },
    CatalogEntry { name: "subset_restriction", description: "nested subsets of an 8-cycle, indicators floored at 0.05", emittable: true },
    CatalogEntry { name: "subset_restriction_hard", description: "nested subsets of an 8-cycle, hard indicators", emittable: true },
    CatalogEntry { name: "simulated_annealing", description: "two-well landscape on an 8-cycle, 4 temperature steps", emittable: true },
    CatalogEntry { name: "absorption_doob", description: "reversible 5-state birth-death chain with soft killing, horizon 60", emittable: true },
    CatalogEntry { name: "geometric_clock", description: "discretized jump process with killing, step 0.1", emittable: true },
    CatalogEntry { name: "linear_gaussian", description: "scalar linear-Gaussian model, 21 simulated observations", emittable: false },
    CatalogEntry { name: "self_avoiding_walk", description: "historical simple walk on Z^2, 5 steps", emittable: false },
];

pub fn catalog() -> &'static [CatalogEntry] {
    &CATALOG
}

/// The finite fixture called `name`.
pub fn fixture(name: &str) -> Result<ZooModel<FiniteModel>> {
    match name {
        "hmm4" => hmm4(),
        "subset_restriction" => restriction(0.05),
        "subset_restriction_hard" => restriction(0.0),
        "simulated_annealing" => two_wells(),
        "absorption_doob" => doob5().map(|(z, _)| z),
        "geometric_clock" => clock().map(|(z, _)| z),
        other if CATALOG.iter().any(|e| e.name == other) => Err(Error::UnsupportedSpace),
        other => Err(Error::InvalidArgument(format!("unknown zoo model {other:?}"))),
    }
}

/// 4-state HMM with strictly positive kernel and 3 observation symbols; horizon 10.
pub fn hmm4() -> Result<ZooModel<FiniteModel>> {
    let kernel = DMatrix::from_row_slice(4, 4, &[0.7, 0.1, 0.1, 0.1, 0.1, 0.6, 0.2, 0.1, 0.1, 0.2, 0.5, 0.2, 0.2, 0.1, 0.1, 0.6]);
    let emission = DMatrix::from_row_slice(4, 3, &[0.7, 0.2, 0.1, 0.2, 0.6, 0.2, 0.1, 0.3, 0.6, 0.3, 0.3, 0.4]);
    let mut zoo = finite_hmm(Measure::uniform(4), kernel, &emission, &[0, 1, 2, 2, 1, 0, 0, 2, 1, 1, 0])?;
    zoo.name = "hmm4".into();
    zoo.model = zoo.model.with_functional("in_0", vec![1.0, 0.0, 0.0, 0.0])?;
    exact_functional(&mut zoo, "in_0")?;
    Ok(zoo)
}

fn exact_functional(zoo: &mut ZooModel<FiniteModel>, name: &str) -> Result<()> {
    use crate::fk::FeynmanKac;
    let f = zoo.model.functional(name).expect("functional was just registered").to_vec();
    for (p, eta) in zoo.model.flow_exact(zoo.model.horizon())?.iter().enumerate() {
        zoo.push(format!("eta_{p}({name})"), eta.integrate(&f), super::Oracle::ExactFlow);
    }
    Ok(())
}

fn lazy_cycle(k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for x in 0..k {
        m[(x, x)] += 0.5;
        m[(x, (x + 1) % k)] += 0.25;
        m[(x, (x + k - 1) % k)] += 0.25;
    }
    m
}

fn restriction(floor: f64) -> Result<ZooModel<FiniteModel>> {
    let sets: Vec<Vec<bool>> = [8, 6, 4, 3].iter().map(|&s| (0..8).map(|x| x < s).collect()).collect();
    let zoo = subset_restriction(&Measure::uniform(8), &lazy_cycle(8), &sets, floor)?;
    let model = zoo.model.clone().with_functional("state", (0..8).map(|x| x as f64).collect())?;
    let mut zoo = ZooModel { model, ..zoo };
    exact_functional(&mut zoo, "state")?;
    Ok(zoo)
}

fn two_wells() -> Result<ZooModel<FiniteModel>> {
    let v = [0.0, 1.0, 2.5, 1.2, 0.4, 1.8, 3.0, 1.5];
    simulated_annealing(&v, &[0.0, 0.5, 1.0, 2.0, 4.0], &lazy_cycle(8), &[3; 4])
}

/// Reversible 5-state birth-death chain with soft killing, horizon 60.
pub fn doob5() -> Result<(ZooModel<FiniteModel>, DoobAnalysis)> {
    let up = [0.4, 0.3, 0.35, 0.2];
    let down = [0.25, 0.3, 0.15, 0.5];
    let mut m = DMatrix::zeros(5, 5);
    for x in 0..4 {
        m[(x, x + 1)] = up[x];
        m[(x + 1, x)] = down[x];
    }
    for x in 0..5 {
        m[(x, x)] = 1.0 - m.row(x).sum();
    }
    let mut pi = vec![1.0];
    for x in 0..4 {
        pi.push(pi[x] * up[x] / down[x]);
    }
    let s: f64 = pi.iter().sum();
    let mu = Measure::probability(pi.iter().map(|p| p / s).collect())?;
    let (mut zoo, a) = absorption_doob(&[1.0, 0.9, 0.8, 0.95, 0.6], &m, &mu, Measure::dirac(5, 4), 60)?;
    zoo.model = zoo.model.with_functional("state", (0..5).map(|x| x as f64).collect())?;
    exact_functional(&mut zoo, "state")?;
    Ok((zoo, a))
}

/// Geometric clock fixture and its closed-form H_0 certificate.
pub fn clock() -> Result<(ZooModel<FiniteModel>, MixingCertificate)> {
    let mut k = DMatrix::from_element(5, 5, 0.02);
    for x in 0..5 {
        k[(x, (x + 1) % 5)] += 0.9;
    }
    let (mut zoo, cert) =
        geometric_clock_discretization(Measure::dirac(5, 0), &[0.0, 0.3, 0.1, 0.5, 0.2], &k, &[8.0, 9.0, 10.0, 8.5, 9.5, 10.0], 0.1)?;
    zoo.model = zoo.model.with_functional("state", (0..5).map(|x| x as f64).collect())?;
    exact_functional(&mut zoo, "state")?;
    Ok((zoo, cert))
}

/// Scalar linear-Gaussian model with 21 observations simulated from seed 7.
pub fn linear_gaussian() -> Result<ZooModel<LinearGaussian>> {
    let model = LinearGaussian::simulate(0.9, 1.0, 0.5, 0.3, 0.0, 1.0, 20, &mut ChaCha8Rng::seed_from_u64(7))?;
    Ok(ZooModel::linear_gaussian(model))
}

/// 5-step walks on `Z^2`.
pub fn saw() -> Result<ZooModel<SelfAvoidingWalk>> {
    self_avoiding_walk(2, 5)
}
