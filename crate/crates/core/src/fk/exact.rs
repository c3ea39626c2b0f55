//! Exact measure flows on finite models. These are the reference values every
//! particle estimator is tested against.

use nalgebra::{DMatrix, DVector};

use super::measure::{boltzmann_gibbs, Measure};
use super::model::{FeynmanKac, FiniteModel};
use crate::error::{Error, Result};

/// Default limit on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: u64 = 10_000_000;

/// `gamma_n` together with `log Z_n = log gamma_n(1)`.
#[derive(Debug, Clone)]
pub struct Unnormalized {
    pub eta: Measure,
    pub log_z: f64,
}

impl Unnormalized {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn gamma(&self) -> Measure {
        self.eta.scaled(self.z())
    }
}

/// A measure over paths `(x_0, .., x_n)` stored in mixed radix, `x_0` most significant.
#[derive(Debug, Clone)]
pub struct PathMeasure {
    num_states: usize,
    length: usize,
    weights: Vec<f64>,
}

impl PathMeasure {
    pub(crate) fn from_weights(num_states: usize, length: usize, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len() as u128, (num_states as u128).pow(length as u32));
        Self { num_states, length, weights }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Number of coordinates, `n + 1`.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut path = vec![0; self.length];
        for slot in path.iter_mut().rev() {
            *slot = index % self.num_states;
            index /= self.num_states;
        }
        path
    }

    pub fn encode(&self, path: &[usize]) -> usize {
        path.iter().fold(0, |acc, &x| acc * self.num_states + x)
    }

    pub fn prob(&self, path: &[usize]) -> f64 {
        self.weights[self.encode(path)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.weights.iter().enumerate().map(|(i, w)| (self.decode(i), *w))
    }

    pub fn expect<F: Fn(&[usize]) -> f64>(&self, f: F) -> f64 {
        self.iter().filter(|(_, w)| *w > 0.0).map(|(p, w)| w * f(&p)).sum()
    }

    /// Law of the coordinate `x_p`.
    pub fn marginal(&self, p: usize) -> Measure {
        let mut out = vec![0.0; self.num_states];
        for (path, w) in self.iter() {
            out[path[p]] += w;
        }
        Measure::from_raw(out)
    }
}

impl FiniteModel {
    /// `Phi_n(eta) = Psi_{G_{n-1}}(eta) M_n`.
    pub fn flow_step_exact(&self, eta_prev: &Measure, n: usize) -> Result<Measure> {
        if n == 0 || n > self.horizon() {
            return Err(Error::InvalidArgument(format!("flow step n = {n} outside 1..={}", self.horizon())));
        }
        let psi = boltzmann_gibbs(eta_prev, self.potential_vec(n - 1))?;
        let row = DVector::from_column_slice(psi.weights()).transpose() * self.kernel(n);
        // Renormalize to absorb floating-point drift in long horizons.
        let mass: f64 = row.iter().sum();
        Ok(Measure::from_raw(row.iter().map(|w| w / mass).collect()))
    }

    /// `eta_0, .., eta_n`.
    pub fn flow_exact(&self, n: usize) -> Result<Vec<Measure>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.eta0().clone());
        for p in 1..=n {
            let next = self.flow_step_exact(&out[p - 1], p)?;
            out.push(next);
        }
        Ok(out)
    }

    /// `gamma_n` and `Z_n = prod_{p<n} eta_p(G_p)`, accumulated in the log domain.
    pub fn unnormalized_flow_exact(&self, n: usize) -> Result<Unnormalized> {
        let etas = self.flow_exact(n)?;
        let log_z = (0..n).map(|p| etas[p].integrate(self.potential_vec(p)).ln()).sum();
        Ok(Unnormalized { eta: etas.into_iter().last().expect("flow has n + 1 entries"), log_z })
    }

    /// `gamma_n` by the linear recursion `gamma_n = gamma_{n-1} Q_n`, without normalization.
    pub fn gamma_recursion(&self, n: usize) -> Result<Measure> {
        if n > self.horizon() {
            return Err(Error::InvalidArgument(format!("n = {n} exceeds horizon {}", self.horizon())));
        }
        let mut gamma = DVector::from_column_slice(self.eta0().weights()).transpose();
        for p in 1..=n {
            gamma = gamma * self.q_matrix(p);
        }
        Ok(Measure::from_raw(gamma.iter().copied().collect()))
    }

    /// `Q_n(x_0..x_n) = eta_0(x_0) prod M_p(x_{p-1}, x_p) prod_{p<n} G_p(x_p) / Z_n`, enumerated.
    pub fn path_measure_exact(&self, n: usize, cap: u64) -> Result<PathMeasure> {
        if n > self.horizon() {
            return Err(Error::InvalidArgument(format!("n = {n} exceeds horizon {}", self.horizon())));
        }
        let k = self.num_states();
        let total = (k as u128).checked_pow(n as u32 + 1).unwrap_or(u128::MAX);
        if total > cap as u128 {
            return Err(Error::EnumerationCap { paths: total, cap });
        }
        let mut weights = Vec::with_capacity(total as usize);
        // Depth-first over the path tree, carrying the running product.
        let mut stack: Vec<(usize, usize, f64)> = (0..k).rev().map(|x| (0, x, self.eta0().weights()[x])).collect();
        while let Some((p, x, w)) = stack.pop() {
            if p == n {
                weights.push(w);
                continue;
            }
            let carried = w * self.potential_vec(p)[x];
            let m = self.kernel(p + 1);
            for y in (0..k).rev() {
                stack.push((p + 1, y, carried * m[(x, y)]));
            }
        }
        let z: f64 = weights.iter().sum();
        if !(z > 0.0) {
            return Err(Error::ZeroMass(z));
        }
        weights.iter_mut().for_each(|w| *w /= z);
        Ok(PathMeasure { num_states: k, length: n + 1, weights })
    }

    /// Time-`p` marginals of `Q_n` for `p = 0..=n`, via `gamma_p(x) Q_{p,n}(1)(x)`.
    pub fn path_marginals_exact(&self, n: usize) -> Result<Vec<Measure>> {
        let k = self.num_states();
        let mut backward = vec![DVector::from_element(k, 1.0); n + 1];
        for p in (0..n).rev() {
            backward[p] = self.q_matrix(p + 1) * &backward[p + 1];
        }
        (0..=n)
            .map(|p| {
                let gamma = self.gamma_recursion(p)?;
                let w: Vec<f64> = gamma.weights().iter().zip(backward[p].iter()).map(|(a, b)| a * b).collect();
                Measure::from_raw(w).normalized()
            })
            .collect()
    }

    /// `Q_n(F)` for the normalized additive functional `F = (n+1)^{-1} sum_p f_p(x_p)`.
    pub fn additive_expectation_exact(&self, components: &[Vec<f64>]) -> Result<f64> {
        let n = components.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("no components".into()))?;
        let marginals = self.path_marginals_exact(n)?;
        Ok(marginals.iter().zip(components).map(|(m, f)| m.integrate(f)).sum::<f64>() / (n + 1) as f64)
    }

    /// `Q_{p+1} .. Q_n`, identity when `p = n`.
    pub fn semigroup_product(&self, p: usize, n: usize) -> DMatrix<f64> {
        let k = self.num_states();
        (p + 1..=n).fold(DMatrix::identity(k, k), |acc, q| acc * self.q_matrix(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::measure::total_variation;

    fn fixture() -> FiniteModel {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.25, 0.25, 0.5],
        );
        let eta0 = Measure::probability(vec![0.2, 0.5, 0.3]).unwrap();
        let g = vec![vec![0.9, 0.4, 0.7], vec![0.3, 1.0, 0.6], vec![0.8, 0.5, 0.2], vec![0.6, 0.6, 0.9]];
        FiniteModel::new(eta0, vec![m; 3], g).unwrap()
    }

    // Independent oracle: plain loops, no matrix library.
    fn loop_flow(model: &FiniteModel, n: usize) -> (Vec<f64>, f64) {
        let k = model.num_states();
        let mut eta = model.eta0().weights().to_vec();
        let mut z = 1.0;
        for p in 1..=n {
            let g = model.potential_vec(p - 1);
            let norm: f64 = (0..k).map(|x| eta[x] * g[x]).sum();
            z *= norm;
            let mut next = vec![0.0; k];
            for x in 0..k {
                for y in 0..k {
                    next[y] += eta[x] * g[x] / norm * model.kernel(p)[(x, y)];
                }
            }
            eta = next;
        }
        (eta, z)
    }

    #[test]
    fn trivial_potential_is_markov_pushforward() {
        let m = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6]);
        let model = FiniteModel::stationary(Measure::probability(vec![1.0, 0.0]).unwrap(), m, vec![1.0; 2], 2).unwrap();
        let eta = model.flow_exact(2).unwrap();
        assert!((eta[1].weights()[0] - 0.7).abs() < 1e-15);
        assert!((eta[2].weights()[0] - (0.7 * 0.7 + 0.3 * 0.4)).abs() < 1e-15);
        let un = model.unnormalized_flow_exact(2).unwrap();
        assert_eq!(un.log_z, 0.0);
    }

    #[test]
    fn doubly_stochastic_mixing() {
        let m = DMatrix::from_element(2, 2, 0.5);
        let model = FiniteModel::stationary(Measure::dirac(2, 0), m, vec![0.3, 0.9], 1).unwrap();
        assert_eq!(model.flow_exact(1).unwrap()[1].weights(), &[0.5, 0.5]);
    }

    #[test]
    fn flow_matches_loop_oracle() {
        let model = fixture();
        let (eta, z) = loop_flow(&model, 3);
        let un = model.unnormalized_flow_exact(3).unwrap();
        for (a, b) in un.eta.weights().iter().zip(&eta) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((un.z() - z).abs() < 1e-14);
    }

    #[test]
    fn zero_horizon_conventions() {
        let model = fixture();
        let un = model.unnormalized_flow_exact(0).unwrap();
        assert_eq!(un.log_z, 0.0);
        assert_eq!(un.gamma(), *model.eta0());
        let q0 = model.path_measure_exact(0, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(q0.weights(), model.eta0().weights());
    }

    #[test]
    fn gamma_recursion_agrees_with_product_formula() {
        let model = fixture();
        for n in 0..=3 {
            let un = model.unnormalized_flow_exact(n).unwrap();
            let gamma = model.gamma_recursion(n).unwrap();
            assert!((gamma.mass() - un.z()).abs() < 1e-12);
            for (a, b) in gamma.weights().iter().zip(un.gamma().weights()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn path_measure_matches_direct_product() {
        let model = fixture();
        let q = model.path_measure_exact(3, DEFAULT_PATH_CAP).unwrap();
        let z = loop_flow(&model, 3).1;
        let path = [2, 0, 1, 1];
        let mut w = model.eta0().weights()[path[0]];
        for p in 1..=3 {
            w *= model.potential_vec(p - 1)[path[p - 1]] * model.kernel(p)[(path[p - 1], path[p])];
        }
        assert!((q.prob(&path) - w / z).abs() < 1e-15);
        assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(q.decode(q.encode(&path)), path);
    }

    #[test]
    fn path_marginals_agree_with_enumeration_and_flow() {
        let model = fixture();
        let q = model.path_measure_exact(3, DEFAULT_PATH_CAP).unwrap();
        let marginals = model.path_marginals_exact(3).unwrap();
        for p in 0..=3 {
            assert!(total_variation(&q.marginal(p), &marginals[p]).unwrap() < 1e-12);
        }
        let eta3 = &model.flow_exact(3).unwrap()[3];
        assert!(total_variation(&q.marginal(3), eta3).unwrap() < 1e-10);
    }

    #[test]
    fn free_chain_path_law() {
        let m = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6]);
        let model = FiniteModel::stationary(Measure::uniform(2), m, vec![1.0; 2], 2).unwrap();
        let q = model.path_measure_exact(2, DEFAULT_PATH_CAP).unwrap();
        assert!((q.prob(&[0, 1, 1]) - 0.5 * 0.3 * 0.6).abs() < 1e-15);
    }

    #[test]
    fn enumeration_cap_is_an_error() {
        let model = fixture();
        assert!(matches!(model.path_measure_exact(3, 80), Err(Error::EnumerationCap { paths: 81, cap: 80 })));
    }
}
