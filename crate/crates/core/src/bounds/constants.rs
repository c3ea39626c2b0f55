//! Moment constants, Orlicz norms and entropy integrals.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Kintchine constant `b(m)`: `b(2m)^{2m} = (2m)!/m! 2^{-m}` and
/// `b(2m+1)^{2m+1} = (2m+1)!/m! / sqrt(m + 1/2) 2^{-(m+1/2)}`.
pub fn kintchine_b(order: u32) -> f64 {
    assert!(order >= 1, "Kintchine constants start at b(1)");
    let m = order / 2;
    if order % 2 == 0 {
        // b(2m)^{2m} = (2m - 1)!!, exact in f64 for small m.
        let double_factorial: f64 = (1..m).map(|i| (2 * i + 1) as f64).product();
        if double_factorial.is_finite() {
            return double_factorial.powf(1.0 / order as f64);
        }
    }
    // log((q + p)!/q!) as a sum keeps large orders finite.
    let log_falling = |top: u32, bottom: u32| ((bottom + 1)..=top).map(|i| (i as f64).ln()).sum::<f64>();
    let ln2 = std::f64::consts::LN_2;
    let log_power = if order % 2 == 0 {
        log_falling(2 * m, m) - m as f64 * ln2
    } else {
        let half = m as f64 + 0.5;
        log_falling(2 * m + 1, m) - 0.5 * half.ln() - half * ln2
    };
    (log_power / order as f64).exp()
}

/// Orlicz norm (`psi(u) = e^{u^2} - 1`) of a standard Gaussian variable, `sqrt(8/3)`.
pub fn orlicz_gaussian() -> f64 {
    (8.0f64 / 3.0).sqrt()
}

/// `Y <= pi_psi(Y) sqrt(x + log 2)` with probability at least `1 - e^{-x}`.
pub fn orlicz_threshold(orlicz_norm: f64, x: f64) -> f64 {
    orlicz_norm * (x + std::f64::consts::LN_2).sqrt()
}

/// A function class described by its covering numbers `N(F, eps)`.
#[derive(Clone)]
pub enum CoverageClass {
    /// Indicators of cells `(-inf, x]` in `R^d`, `N <= c (d+1) (4e)^{d+1} eps^{-2d}`.
    /// The constant `c` is not specified by the theory; 1 is a placeholder.
    Cells { d: u32, c: f64 },
    /// A user covering-number function.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for CoverageClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoverageClass::Cells { d, c } => f.debug_struct("Cells").field("d", d).field("c", c).finish(),
            CoverageClass::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl CoverageClass {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CoverageClass::Custom(Arc::new(f))
    }

    /// `log N(F, eps)`, with covering numbers floored at 1.
    pub fn log_covering(&self, eps: f64) -> f64 {
        match self {
            CoverageClass::Cells { d, c } => {
                let d = *d as f64;
                let log_n = c.ln() + (d + 1.0).ln() + (d + 1.0) * (4.0 * std::f64::consts::E).ln() - 2.0 * d * eps.ln();
                log_n.max(0.0)
            }
            CoverageClass::Custom(f) => f(eps).max(1.0).ln(),
        }
    }

    /// `sqrt(log(8 + N^2))` computed without overflowing for huge `N`.
    fn entropy_integrand(&self, eps: f64) -> f64 {
        let log_n = self.log_covering(eps);
        let v = if log_n > 300.0 { 2.0 * log_n + (8.0 * (-2.0 * log_n).exp()).ln_1p() } else { (8.0 + (2.0 * log_n).exp()).ln() };
        v.sqrt()
    }

    /// The bound `2 sqrt(log[c (d+1) (4e)^{d+1}]) + sqrt(2d)` on `int_0^2 sqrt(log N)` for cells.
    pub fn crude_cells_bound(&self) -> Option<f64> {
        match self {
            CoverageClass::Cells { d, c } => {
                let d = *d as f64;
                let base = c * (d + 1.0) * (4.0 * std::f64::consts::E).powf(d + 1.0);
                Some(2.0 * base.ln().max(0.0).sqrt() + (2.0 * d).sqrt())
            }
            CoverageClass::Custom(_) => None,
        }
    }
}

/// `int_a^b f` by tanh-sinh quadrature. Kinks from flooring covering numbers at 1 make the
/// error estimate pessimistic (around `1e-3` relative); non-integrable singularities at 0
/// show up as estimates of order `1e-1` and are rejected.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, what: &str) -> Result<f64> {
    let out = quadrature::double_exponential::integrate(&f, a, b, 1e-10);
    if !out.integral.is_finite() || out.error_estimate > 1e-2 * out.integral.abs().max(1e-300) {
        return Err(Error::DivergentEntropy(format!(
            "{what}: estimate {} with error {}",
            out.integral, out.error_estimate
        )));
    }
    Ok(out.integral)
}

/// `12^2 int_0^2 sqrt(log(8 + N(F, eps)^2)) d eps`, the Orlicz bound on the empirical process.
pub fn entropy_integral(cls: &CoverageClass) -> Result<f64> {
    Ok(144.0 * integrate(|e| cls.entropy_integrand(e), 0.0, 2.0, "entropy integral")?)
}

/// `int_0^2 sqrt(log N(F, eps)) d eps`.
pub fn sqrt_log_covering_integral(cls: &CoverageClass) -> Result<f64> {
    integrate(|e| cls.log_covering(e).sqrt(), 0.0, 2.0, "covering integral")
}

/// `c_F = 24^2 int_0^1 sqrt(log(8 + N(F, eps)^2)) d eps`.
pub fn empirical_process_constant(cls: &CoverageClass) -> Result<f64> {
    Ok(576.0 * integrate(|e| cls.entropy_integrand(e), 0.0, 1.0, "empirical process constant")?)
}
