use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::measure::{Measure, PROB_TOL};
use crate::error::{Error, Result};

/// A discrete-time Feynman-Kac model: initial law `eta_0`, Markov kernels `M_n`
/// (n >= 1) and potentials `G_n` valued in (0, 1].
///
/// Implementors only need to sample; exact operators live on [`FiniteModel`].
pub trait FeynmanKac: Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;

    /// Largest time index `n_max` for which `G_n` is defined.
    fn horizon(&self) -> usize;

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> Self::State;

    /// Draw from `M_n(x, .)`, `1 <= n <= horizon`.
    fn sample_transition(&self, n: usize, x: &Self::State, rng: &mut ChaCha8Rng) -> Self::State;

    /// `G_n(x)`; range-checked by callers through [`check_potential`].
    fn potential(&self, n: usize, x: &Self::State) -> f64;

    /// Transition density `H_n(x, y)` with respect to a reference measure, if known.
    fn density(&self, _n: usize, _x: &Self::State, _y: &Self::State) -> Option<f64> {
        None
    }

    /// Whether `G_n = 0` is allowed (hard indicator potentials).
    fn allows_zero_potential(&self) -> bool {
        false
    }
}

/// Validate a potential evaluation against the (0, 1] contract.
pub fn check_potential(time: usize, value: f64, allow_zero: bool) -> Result<f64> {
    let lower_ok = if allow_zero { value >= 0.0 } else { value > 0.0 };
    if lower_ok && value <= 1.0 {
        Ok(value)
    } else {
        Err(Error::PotentialRange { time, value })
    }
}

/// Draw an index from a cumulative weight vector whose last entry is the total mass.
pub(crate) fn sample_cumulative(cum: &[f64], u: f64) -> usize {
    let target = u * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= target).min(cum.len() - 1)
}

pub(crate) fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// A Feynman-Kac model on the finite set `{0, .., k-1}` with dense kernels.
///
/// The reference measure is counting measure, so `H_n(x, y) = M_n(x, y)`.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    labels: Vec<String>,
    eta0: Measure,
    // kernels[n - 1] = M_n
    kernels: Vec<DMatrix<f64>>,
    // potentials[n] = G_n
    potentials: Vec<Vec<f64>>,
    allow_zero: bool,
    functionals: BTreeMap<String, Vec<f64>>,
    eta0_cum: Vec<f64>,
    kernel_cum: Vec<Vec<Vec<f64>>>,
}

impl FiniteModel {
    /// `kernels` holds `M_1..M_n`, `potentials` holds `G_0..G_n`.
    pub fn new(eta0: Measure, kernels: Vec<DMatrix<f64>>, potentials: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(eta0, kernels, potentials, false)
    }

    /// Same as [`FiniteModel::new`] but accepts `G_n(x) = 0`.
    pub fn with_hard_potentials(eta0: Measure, kernels: Vec<DMatrix<f64>>, potentials: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(eta0, kernels, potentials, true)
    }

    /// Time-homogeneous model: the same `M` and `G` at every time up to `horizon`.
    pub fn stationary(eta0: Measure, kernel: DMatrix<f64>, potential: Vec<f64>, horizon: usize) -> Result<Self> {
        Self::new(eta0, vec![kernel; horizon], vec![potential; horizon + 1])
    }

    fn build(eta0: Measure, kernels: Vec<DMatrix<f64>>, potentials: Vec<Vec<f64>>, allow_zero: bool) -> Result<Self> {
        let k = eta0.len();
        if (eta0.mass() - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidModel(format!("eta0 has mass {}", eta0.mass())));
        }
        if potentials.len() != kernels.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "{} kernels need {} potentials, got {}",
                kernels.len(),
                kernels.len() + 1,
                potentials.len()
            )));
        }
        for (i, m) in kernels.iter().enumerate() {
            if m.nrows() != k || m.ncols() != k {
                return Err(Error::InvalidModel(format!("kernel M_{} is {}x{}, expected {k}x{k}", i + 1, m.nrows(), m.ncols())));
            }
            for r in 0..k {
                let row = m.row(r);
                if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidModel(format!("kernel M_{} row {r} has a negative or non-finite entry", i + 1)));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidModel(format!("kernel M_{} row {r} sums to {s}", i + 1)));
                }
            }
        }
        for (n, g) in potentials.iter().enumerate() {
            if g.len() != k {
                return Err(Error::InvalidModel(format!("potential G_{n} has {} values, expected {k}", g.len())));
            }
            for &v in g {
                check_potential(n, v, allow_zero)?;
            }
        }
        let eta0_cum = cumulative(eta0.weights().iter().copied());
        let kernel_cum = kernels
            .iter()
            .map(|m| (0..k).map(|r| cumulative(m.row(r).iter().copied())).collect())
            .collect();
        Ok(Self {
            labels: (0..k).map(|i| i.to_string()).collect(),
            eta0,
            kernels,
            potentials,
            allow_zero,
            functionals: BTreeMap::new(),
            eta0_cum,
            kernel_cum,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.num_states() {
            return Err(Error::InvalidModel(format!("{} labels for {} states", labels.len(), self.num_states())));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Register a named test function `f: E -> R` (used by the CLI and experiments).
    pub fn with_functional(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.num_states() {
            return Err(Error::InvalidModel(format!("functional has {} values for {} states", values.len(), self.num_states())));
        }
        self.functionals.insert(name.into(), values);
        Ok(self)
    }

    /// Truncate the model to a shorter horizon.
    pub fn truncated(&self, horizon: usize) -> Result<Self> {
        if horizon > self.horizon() {
            return Err(Error::InvalidArgument(format!("horizon {horizon} exceeds model horizon {}", self.horizon())));
        }
        let mut out = self.clone();
        out.kernels.truncate(horizon);
        out.kernel_cum.truncate(horizon);
        out.potentials.truncate(horizon + 1);
        Ok(out)
    }

    pub fn num_states(&self) -> usize {
        self.eta0.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn eta0(&self) -> &Measure {
        &self.eta0
    }

    /// `M_n`, `1 <= n <= horizon`.
    pub fn kernel(&self, n: usize) -> &DMatrix<f64> {
        assert!(n >= 1 && n <= self.kernels.len(), "kernel M_{n} is not defined");
        &self.kernels[n - 1]
    }

    pub fn kernels(&self) -> &[DMatrix<f64>] {
        &self.kernels
    }

    /// `G_n`, `0 <= n <= horizon`.
    pub fn potential_vec(&self, n: usize) -> &[f64] {
        &self.potentials[n]
    }

    pub fn potentials(&self) -> &[Vec<f64>] {
        &self.potentials
    }

    pub fn functionals(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.functionals
    }

    pub fn functional(&self, name: &str) -> Option<&[f64]> {
        self.functionals.get(name).map(Vec::as_slice)
    }

    pub fn hard_potentials(&self) -> bool {
        self.allow_zero
    }

    /// `Q_n = diag(G_{n-1}) M_n`.
    pub fn q_matrix(&self, n: usize) -> DMatrix<f64> {
        let mut q = self.kernel(n).clone();
        for (r, g) in self.potentials[n - 1].iter().enumerate() {
            q.row_mut(r).scale_mut(*g);
        }
        q
    }
}

impl FeynmanKac for FiniteModel {
    type State = usize;

    fn horizon(&self) -> usize {
        self.kernels.len()
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> usize {
        sample_cumulative(&self.eta0_cum, rng.random())
    }

    fn sample_transition(&self, n: usize, x: &usize, rng: &mut ChaCha8Rng) -> usize {
        sample_cumulative(&self.kernel_cum[n - 1][*x], rng.random())
    }

    fn potential(&self, n: usize, x: &usize) -> f64 {
        self.potentials[n][*x]
    }

    fn density(&self, n: usize, x: &usize, y: &usize) -> Option<f64> {
        Some(self.kernels[n - 1][(*x, *y)])
    }

    fn allows_zero_potential(&self) -> bool {
        self.allow_zero
    }
}
