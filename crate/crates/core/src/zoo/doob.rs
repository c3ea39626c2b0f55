use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{exact_references, Oracle, ZooModel};
use crate::error::{Error, Result};
use crate::fk::{boltzmann_gibbs, total_variation, FiniteModel, Measure};

const POWER_TOL: f64 = 1e-13;
const POWER_MAX_ITER: usize = 1_000_000;

/// Ground state of `Q = G M` for `M` reversible with respect to `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoobAnalysis {
    /// Top eigenvalue of `Q`.
    pub lambda: f64,
    /// Positive eigenvector, `max h = 1`.
    pub h: Vec<f64>,
    /// `M^h(x, y) = M(x, y) h(y) / M(h)(x)`.
    pub doob_kernel: DMatrix<f64>,
    /// Yaglom limit `Psi_{M(h)}(mu)`.
    pub eta_inf: Measure,
    /// Invariant law of the h-process, `Psi_{h M(h)}(mu)`.
    pub eta_inf_h: Measure,
    /// Top eigenvalue from a dense symmetric eigensolve of the similar matrix.
    pub lambda_dense: f64,
}

impl DoobAnalysis {
    /// `Z_n = lambda^n eta_0(h) E[h^{-1}(X^h_n)]` with `X^h_0 ~ Psi_h(eta_0)`.
    pub fn free_energy(&self, eta0: &Measure, n: usize) -> Result<f64> {
        let mut law = boltzmann_gibbs(eta0, &self.h)?;
        for _ in 0..n {
            let row = DVector::from_column_slice(law.weights()).transpose() * &self.doob_kernel;
            law = Measure::new(row.iter().map(|v| v.max(0.0)).collect())?;
        }
        let inv_h: Vec<f64> = self.h.iter().map(|v| 1.0 / v).collect();
        Ok(self.lambda.powi(n as i32) * eta0.integrate(&self.h) * law.integrate(&inv_h))
    }

    /// `max |Q h - lambda h|`.
    pub fn residual(&self, g: &[f64], m: &DMatrix<f64>) -> f64 {
        let qh = q_apply(g, m, &self.h);
        qh.iter().zip(&self.h).map(|(a, b)| (a - self.lambda * b).abs()).fold(0.0, f64::max)
    }
}

fn q_apply(g: &[f64], m: &DMatrix<f64>, h: &[f64]) -> Vec<f64> {
    let mh = m * DVector::from_column_slice(h);
    mh.iter().zip(g).map(|(v, g)| g * v).collect()
}

fn power_iteration(g: &[f64], m: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let mut h = vec![1.0; g.len()];
    for _ in 0..POWER_MAX_ITER {
        let qh = q_apply(g, m, &h);
        let lambda = qh.iter().copied().fold(0.0, f64::max);
        if lambda <= 0.0 {
            return Err(Error::NonPositiveEigenvector("Q h vanished".into()));
        }
        let residual = qh.iter().zip(&h).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
        h = qh.iter().map(|v| v / lambda).collect();
        if residual <= POWER_TOL * lambda {
            return Ok((lambda, h));
        }
    }
    Err(Error::NonPositiveEigenvector("power iteration did not converge (periodic or reducible kernel)".into()))
}

/// Absorption model `(G, M)` with its ground state, Doob h-process and Yaglom limits.
///
/// `M` must be reversible with respect to the positive measure `mu`, and `G` positive.
pub fn absorption_doob(
    g: &[f64],
    m: &DMatrix<f64>,
    mu: &Measure,
    eta0: Measure,
    horizon: usize,
) -> Result<(ZooModel<FiniteModel>, DoobAnalysis)> {
    let k = g.len();
    if mu.len() != k || m.nrows() != k || m.ncols() != k {
        return Err(Error::InvalidModel("G, M and mu have inconsistent sizes".into()));
    }
    if g.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
        return Err(Error::NonPositiveEigenvector("potential must be positive and at most 1".into()));
    }
    let w = mu.weights();
    if w.iter().any(|v| *v <= 0.0) {
        return Err(Error::NonPositiveEigenvector("reversible measure must charge every state".into()));
    }
    for x in 0..k {
        for y in 0..x {
            let defect = (w[x] * m[(x, y)] - w[y] * m[(y, x)]).abs();
            if defect > 1e-12 {
                return Err(Error::InvalidModel(format!("M is not mu-reversible at ({x}, {y}), defect {defect:e}")));
            }
        }
    }
    let model = FiniteModel::stationary(eta0, m.clone(), g.to_vec(), horizon)?;

    let (lambda, h) = power_iteration(g, m)?;
    if h.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveEigenvector(format!("ground state has a non-positive entry: {h:?}")));
    }
    // G^{1/2} D^{1/2} M D^{-1/2} G^{1/2} is symmetric and similar to Q.
    let sym = DMatrix::from_fn(k, k, |x, y| (g[x] * g[y]).sqrt() * (w[x] / w[y]).sqrt() * m[(x, y)]);
    let sym = (&sym + sym.transpose()) * 0.5;
    let lambda_dense = SymmetricEigen::new(sym).eigenvalues.max();
    if (lambda - lambda_dense).abs() > 1e-9 * lambda {
        return Err(Error::NonPositiveEigenvector(format!("power iteration gave {lambda}, dense solve {lambda_dense}")));
    }

    let mh: Vec<f64> = (m * DVector::from_column_slice(&h)).iter().copied().collect();
    let doob_kernel = DMatrix::from_fn(k, k, |x, y| m[(x, y)] * h[y] / mh[x]);
    let eta_inf = boltzmann_gibbs(mu, &mh)?;
    let hmh: Vec<f64> = h.iter().zip(&mh).map(|(a, b)| a * b).collect();
    let eta_inf_h = boltzmann_gibbs(mu, &hmh)?;
    let analysis = DoobAnalysis { lambda, h, doob_kernel, eta_inf, eta_inf_h, lambda_dense };

    let mut zoo = ZooModel { name: "absorption_doob".into(), model, oracle: Oracle::Eigen, references: Vec::new(), log_rescale: vec![0.0; horizon + 1] };
    exact_references(&mut zoo)?;
    zoo.push("lambda", analysis.lambda, Oracle::Eigen);
    for (i, v) in analysis.eta_inf.weights().iter().enumerate() {
        zoo.push(format!("eta_inf[{i}]"), *v, Oracle::Eigen);
    }
    Ok((zoo, analysis))
}

/// Exponential fit `||eta_n - eta_inf||_tv <= c3 exp(-delta n)` over `n <= horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TvDecay {
    pub distances: Vec<f64>,
    /// Least-squares rate of `log d_n` on the points above the rounding floor.
    pub delta: f64,
    /// Smallest `c3` making the bound hold at every `n` with the fitted `delta`.
    pub c3: f64,
}

impl TvDecay {
    pub fn holds(&self) -> bool {
        self.distances.iter().enumerate().all(|(n, d)| *d <= self.c3 * (-self.delta * n as f64).exp() * (1.0 + 1e-12))
    }
}

pub fn fit_tv_decay(model: &FiniteModel, eta_inf: &Measure, horizon: usize) -> Result<TvDecay> {
    let flow = model.flow_exact(horizon)?;
    let distances = flow.iter().map(|eta| total_variation(eta, eta_inf)).collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> =
        distances.iter().enumerate().filter(|(_, d)| **d > 1e-12).map(|(n, d)| (n as f64, d.ln())).collect();
    if points.len() < 2 {
        return Err(Error::InvalidArgument("flow reaches the limit too fast to fit a decay rate".into()));
    }
    let len = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / len;
    let my = points.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let delta = -sxy / sxx;
    let c3 = distances.iter().enumerate().map(|(n, d)| d * (delta * n as f64).exp()).fold(0.0, f64::max);
    Ok(TvDecay { distances, delta, c3 })
}
