use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Oracle, ZooModel};
use crate::error::{Error, Result};
use crate::fk::FeynmanKac;

/// Scalar linear-Gaussian state space model
/// `X_n = A X_{n-1} + sqrt(Q) W_n`, `Y_n = C X_n + sqrt(R) V_n`, `X_0 ~ N(m0, p0)`.
///
/// `G_n(x) = exp(-(y_n - C x)^2 / (2R))`, the likelihood times `sqrt(2 pi R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussian {
    pub a: f64,
    pub c: f64,
    pub q: f64,
    pub r: f64,
    pub m0: f64,
    pub p0: f64,
    pub observations: Vec<f64>,
}

impl LinearGaussian {
    pub fn new(a: f64, c: f64, q: f64, r: f64, m0: f64, p0: f64, observations: Vec<f64>) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidModel(format!("observation noise R = {r} must be positive")));
        }
        if !(q >= 0.0 && p0 >= 0.0) {
            return Err(Error::InvalidModel(format!("variances Q = {q}, p0 = {p0} must be nonnegative")));
        }
        if observations.is_empty() {
            return Err(Error::InvalidArgument("a linear-Gaussian model needs at least one observation".into()));
        }
        if [a, c, q, m0, p0].iter().chain(&observations).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        Ok(Self { a, c, q, r, m0, p0, observations })
    }

    /// Simulate observations `y_0..y_n` from the model itself.
    pub fn simulate(a: f64, c: f64, q: f64, r: f64, m0: f64, p0: f64, horizon: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut x = m0 + p0.sqrt() * normal(rng);
        let mut obs = Vec::with_capacity(horizon + 1);
        for n in 0..=horizon {
            if n > 0 {
                x = a * x + q.sqrt() * normal(rng);
            }
            obs.push(c * x + r.sqrt() * normal(rng));
        }
        Self::new(a, c, q, r, m0, p0, obs)
    }

    /// `log c_p = -log(2 pi R) / 2` per time step.
    pub fn log_rescale(&self) -> Vec<f64> {
        let step = -0.5 * (2.0 * std::f64::consts::PI * self.r).ln();
        (0..self.observations.len()).map(|n| n as f64 * step).collect()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl FeynmanKac for LinearGaussian {
    type State = f64;

    fn horizon(&self) -> usize {
        self.observations.len() - 1
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.m0 + self.p0.sqrt() * normal(rng)
    }

    fn sample_transition(&self, _n: usize, x: &f64, rng: &mut ChaCha8Rng) -> f64 {
        self.a * x + self.q.sqrt() * normal(rng)
    }

    fn potential(&self, n: usize, x: &f64) -> f64 {
        let e = self.observations[n] - self.c * x;
        (-e * e / (2.0 * self.r)).exp()
    }

    fn density(&self, _n: usize, x: &f64, y: &f64) -> Option<f64> {
        if self.q <= 0.0 {
            return None;
        }
        let e = y - self.a * x;
        Some((-e * e / (2.0 * self.q)).exp() / (2.0 * std::f64::consts::PI * self.q).sqrt())
    }

    fn allows_zero_potential(&self) -> bool {
        // exp underflows for far outliers; the model itself is strictly positive.
        true
    }
}

/// One step of the Kalman recursion: predictor `N(pred_mean, pred_var)` of `X_n` given
/// `y_0..y_{n-1}`, filter after `y_n`, and `log Z_n` of the rescaled model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanStep {
    pub pred_mean: f64,
    pub pred_var: f64,
    pub filt_mean: f64,
    pub filt_var: f64,
    pub log_z: f64,
}

/// Kalman predictor and filter for `n = 0..=horizon`.
pub fn kalman_predictor(model: &LinearGaussian) -> Vec<KalmanStep> {
    let (mut m, mut p) = (model.m0, model.p0);
    let mut log_z = 0.0;
    let half_log_r = 0.5 * (2.0 * std::f64::consts::PI * model.r).ln();
    let mut out = Vec::with_capacity(model.observations.len());
    for &y in &model.observations {
        let s = model.c * model.c * p + model.r;
        let gain = p * model.c / s;
        let e = y - model.c * m;
        let filt_mean = m + gain * e;
        let filt_var = (1.0 - gain * model.c) * p;
        out.push(KalmanStep { pred_mean: m, pred_var: p, filt_mean, filt_var, log_z });
        log_z += -0.5 * (2.0 * std::f64::consts::PI * s).ln() - e * e / (2.0 * s) + half_log_r;
        m = model.a * filt_mean;
        p = model.a * model.a * filt_var + model.q;
    }
    out
}

impl ZooModel<LinearGaussian> {
    /// Wrap a linear-Gaussian model with its Kalman reference values.
    pub fn linear_gaussian(model: LinearGaussian) -> Self {
        let steps = kalman_predictor(&model);
        let log_rescale = model.log_rescale();
        let mut zoo = ZooModel { name: "linear_gaussian".into(), model, oracle: Oracle::Kalman, references: Vec::new(), log_rescale };
        for (n, s) in steps.iter().enumerate() {
            zoo.push(format!("pred_mean_{n}"), s.pred_mean, Oracle::Kalman);
            zoo.push(format!("pred_var_{n}"), s.pred_var, Oracle::Kalman);
            zoo.push(format!("log_Z_{n}"), s.log_z, Oracle::Kalman);
        }
        zoo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rejects_degenerate_noise() {
        assert!(matches!(LinearGaussian::new(1.0, 1.0, 1.0, 0.0, 0.0, 1.0, vec![0.0]), Err(Error::InvalidModel(_))));
        assert!(LinearGaussian::new(1.0, 1.0, -1.0, 1.0, 0.0, 1.0, vec![0.0]).is_err());
    }

    // Static model: posterior of a constant given n observations is conjugate Gaussian.
    #[test]
    fn static_model_posterior() {
        let obs = vec![0.3, -1.2, 0.8, 2.0, 0.1];
        let (c, r, m0, p0) = (1.5, 0.7, 0.2, 2.0);
        let model = LinearGaussian::new(1.0, c, 0.0, r, m0, p0, obs.clone()).unwrap();
        let steps = kalman_predictor(&model);
        for n in 0..obs.len() {
            let precision = 1.0 / p0 + n as f64 * c * c / r;
            let mean = (m0 / p0 + c * obs[..n].iter().sum::<f64>() / r) / precision;
            assert!((steps[n].pred_mean - mean).abs() < 1e-12);
            assert!((steps[n].pred_var - 1.0 / precision).abs() < 1e-12);
        }
    }

    // log Z_n of the rescaled model: marginal density of y_0..y_{n-1} times (2 pi R)^{n/2}.
    #[test]
    fn free_energy_matches_joint_density() {
        let obs = vec![0.5, -0.4];
        let (a, c, q, r, m0, p0) = (0.9, 1.0, 0.5, 0.3, 0.0, 1.0);
        let model = LinearGaussian::new(a, c, q, r, m0, p0, obs.clone()).unwrap();
        let steps = kalman_predictor(&model);
        // (Y_0, Y_1) is jointly Gaussian with this covariance.
        let v0 = c * c * p0 + r;
        let v1 = c * c * (a * a * p0 + q) + r;
        let cov = c * c * a * p0;
        let det = v0 * v1 - cov * cov;
        let quad = (v1 * obs[0] * obs[0] - 2.0 * cov * obs[0] * obs[1] + v0 * obs[1] * obs[1]) / det;
        let log_joint = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad;
        let want = log_joint + (2.0 * std::f64::consts::PI * r).ln();
        // log Z_2 needs the third step, so extend with a dummy observation.
        let extended = LinearGaussian::new(a, c, q, r, m0, p0, vec![obs[0], obs[1], 0.0]).unwrap();
        let z2 = kalman_predictor(&extended)[2].log_z;
        assert!((z2 - want).abs() < 1e-12, "{z2} vs {want}");
        assert_eq!(steps[0].log_z, 0.0);
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = LinearGaussian::simulate(0.9, 1.0, 0.5, 0.3, 0.0, 1.0, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = LinearGaussian::simulate(0.9, 1.0, 0.5, 0.3, 0.0, 1.0, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.horizon(), 5);
        assert!(a.potential(0, &a.observations[0]) == 1.0);
    }
}
