//! Concentration inequalities as evaluable curves `x -> bound(x)`: each event
//! "deviation <= bound(x)" holds with probability at least `1 - e^{-x}`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::constants::{empirical_process_constant, CoverageClass};
use super::legendre::{inv_l_star, LegendreKind};
use crate::error::{Error, Result};
use crate::semigroup::{uniform_tau_bounds, ContractionProfile, MixingCertificate};

/// Where a constant inside a tail curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Read off a mixing certificate.
    Certificate,
    /// Computed from an exact contraction profile.
    ExactProfile,
    /// Supplied by the caller.
    Supplied,
    /// The universal default (for example `sigma = 1`).
    Default,
    /// A substitute for a constant the theory leaves undefined.
    Interpreted,
    /// Depends on a placeholder universal constant.
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constant {
    pub name: String,
    pub value: f64,
    pub provenance: Provenance,
}

/// A tail bound `x -> bound(x)` together with the constants it was built from.
#[derive(Clone)]
pub struct TailCurve {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    constants: Vec<Constant>,
}

impl fmt::Debug for TailCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TailCurve").field("name", &self.name).field("constants", &self.constants).finish()
    }
}

impl TailCurve {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static, constants: Vec<Constant>) -> Self {
        Self { name: name.into(), eval: Arc::new(eval), constants }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn constants(&self) -> &[Constant] {
        &self.constants
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }

    /// The deviation level at confidence `1 - e^{-x}`.
    pub fn bound(&self, x: f64) -> f64 {
        assert!(x >= 0.0, "tail curves are defined for x >= 0");
        (self.eval)(x)
    }

    /// `1 - e^{-x}`, the probability the event holds at least.
    pub fn prob_floor(x: f64) -> f64 {
        -(-x).exp_m1()
    }

    /// Pointwise sum, which bounds the inverse transform of a sum of log-Laplace bounds.
    pub fn add(&self, other: &TailCurve) -> TailCurve {
        bretagnolle_rio_add(self, other)
    }
}

/// `(L*_{A+B})^{-1} <= (L*_A)^{-1} + (L*_B)^{-1}`, as a pointwise sum of curves.
pub fn bretagnolle_rio_add(a: &TailCurve, b: &TailCurve) -> TailCurve {
    let (fa, fb) = (a.eval.clone(), b.eval.clone());
    let mut constants = a.constants.clone();
    constants.extend(b.constants.iter().cloned());
    TailCurve::new(format!("{}+{}", a.name, b.name), move |x| fa(x) + fb(x), constants)
}

/// A curve given by a single inverse Legendre transform, `x -> (L*)^{-1}(x)`.
pub fn inverse_legendre_curve(kind: LegendreKind) -> TailCurve {
    TailCurve::new(format!("{kind:?}"), move |x| inv_l_star(kind, x), Vec::new())
}

fn check_n(n_particles: usize) -> Result<f64> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    Ok(n_particles as f64)
}

fn sigma_constant(sigma: Option<f64>) -> Result<(f64, Constant)> {
    let (value, provenance) = match sigma {
        Some(s) if s >= 0.0 && s.is_finite() => (s, Provenance::Supplied),
        Some(s) => return Err(Error::InvalidArgument(format!("sigma {s} must be nonnegative"))),
        None => (1.0, Provenance::Default),
    };
    Ok((value, Constant { name: "sigma".into(), value, provenance }))
}

fn c(name: &str, value: f64, provenance: Provenance) -> Constant {
    Constant { name: name.into(), value, provenance }
}

/// `sigma^2 (L_1*)^{-1}(x / (K sigma^2))`, continuous at `sigma = 0`.
fn scaled_l1_inverse(sigma_sq: f64, x: f64, k: f64) -> f64 {
    if sigma_sq == 0.0 || x == 0.0 {
        0.0
    } else {
        sigma_sq * inv_l_star(LegendreKind::L1, x / (k * sigma_sq))
    }
}

/// Finite-horizon marginal bound from an exact profile.
///
/// `bound(x) = 4 tau_{2,1}(n)/N (1 + (L_0*)^{-1}(x)) + 2 b_n sbar^2 (L_1*)^{-1}(x / (N sbar^2))`
/// with `sbar^2 = b_n^{-2} sum_p g_{p,n}^2 beta(P_{p,n})^2 sigma_p^2` and `b_n >= kappa(n)`
/// (defaults to `kappa(n)`). `sigma[p]` defaults to 1.
pub fn marginal_tail(profile: &ContractionProfile, sigma: Option<&[f64]>, n_particles: usize, n: usize, b_n: Option<f64>) -> Result<TailCurve> {
    let big_n = check_n(n_particles)?;
    if n > profile.horizon {
        return Err(Error::InvalidArgument(format!("n = {n} exceeds profile horizon {}", profile.horizon)));
    }
    let kappa = profile.kappa(n);
    let b = b_n.unwrap_or(kappa);
    if b < kappa || !(b > 0.0) {
        return Err(Error::InvalidBn { b_n: b, kappa });
    }
    let sig = |p: usize| sigma.map_or(1.0, |s| s[p]);
    if let Some(s) = sigma {
        if s.len() < n + 1 {
            return Err(Error::InvalidArgument(format!("need {} sigma values, got {}", n + 1, s.len())));
        }
    }
    let sbar_sq = (0..=n).map(|p| (profile.g_pn(p, n) * profile.beta_pn(p, n) * sig(p)).powi(2)).sum::<f64>() / (b * b);
    let tau21 = profile.tau(2, 1, n);
    let constants = vec![
        c("tau_2_1", tau21, Provenance::ExactProfile),
        c("kappa", kappa, Provenance::ExactProfile),
        c("b_n", b, if b_n.is_some() { Provenance::Supplied } else { Provenance::ExactProfile }),
        c("sigma_bar_sq", sbar_sq, if sigma.is_some() { Provenance::Supplied } else { Provenance::Default }),
        c("N", big_n, Provenance::Supplied),
    ];
    Ok(TailCurve::new(
        "marginal",
        move |x| 4.0 * tau21 / big_n * (1.0 + inv_l_star(LegendreKind::L0, x)) + 2.0 * b * scaled_l1_inverse(sbar_sq, x, big_n),
        constants,
    ))
}

/// Time-uniform marginal bound `p_m(x)/N + q_m(x)/sqrt(N)` with
/// `p_m(x) = 4 tau_{2,1} (1 + 2(x + sqrt x)) + (2/3) kappa x`, `q_m(x) = sqrt(8 sigma^2 tau_{2,2} x)`.
pub fn uniform_marginal_tail(cert: &MixingCertificate, sigma: Option<f64>, n_particles: usize) -> Result<TailCurve> {
    let big_n = check_n(n_particles)?;
    let (s, sc) = sigma_constant(sigma)?;
    let (tau21, kappa) = uniform_tau_bounds(cert, 2, 1)?;
    let (tau22, _) = uniform_tau_bounds(cert, 2, 2)?;
    let constants = vec![
        c("tau_bar_2_1", tau21, Provenance::Certificate),
        c("tau_bar_2_2", tau22, Provenance::Certificate),
        c("kappa_bar", kappa, Provenance::Certificate),
        sc,
        c("N", big_n, Provenance::Supplied),
    ];
    Ok(TailCurve::new(
        "uniform",
        move |x| {
            let p = 4.0 * tau21 * (1.0 + 2.0 * (x + x.sqrt())) + 2.0 / 3.0 * kappa * x;
            let q = (8.0 * s * s * tau22 * x).sqrt();
            p / big_n + q / big_n.sqrt()
        },
        constants,
    ))
}

/// Genealogical tree bound `((n+1)/N) p_{n,m}(x) + sqrt((n+1)/N) q_m(x)` with
/// `p_{n,m}(x) = 4 (chi g^m)^2 (1 + 2(x + sqrt x)) + (2/3) chi g^m x / (n+1)`, `q_m(x) = chi g^m sqrt(8 sigma^2 x)`.
pub fn genealogical_tail(cert: &MixingCertificate, sigma: Option<f64>, n_particles: usize, n: usize) -> Result<TailCurve> {
    let big_n = check_n(n_particles)?;
    let (s, sc) = sigma_constant(sigma)?;
    let cg = cert.chi_g().ok_or_else(|| Error::InvalidArgument("genealogical bound needs an H_m certificate".into()))?;
    let n1 = (n + 1) as f64;
    let constants = vec![c("chi_g_m", cg, Provenance::Certificate), sc, c("N", big_n, Provenance::Supplied), c("n", n as f64, Provenance::Supplied)];
    Ok(TailCurve::new(
        "tree",
        move |x| {
            let p = 4.0 * cg * cg * (1.0 + 2.0 * (x + x.sqrt())) + 2.0 / 3.0 * cg / n1 * x;
            let q = cg * (8.0 * s * s * x).sqrt();
            n1 / big_n * p + (n1 / big_n).sqrt() * q
        },
        constants,
    ))
}

/// Bound on `(+-1/n) log(Z_n^N / Z_n)`: `p_m(x)/N + q_m(x)/sqrt(N)` with
/// `p_m(x) = c_1 (1 + 2(x + sqrt x)) + c_2 x` and `q_m(x) = c_3 sqrt x`.
///
/// `c_1 = (4 g tau_{1,1})^2 + 8 g tau_{3,1}` and `c_3 = 4 g sqrt(2 tau_{2,2} sigma^2)`. The
/// linear coefficient is taken as `c_2 = 4 g kappa_bar / 3`, using the certified bound on
/// `kappa`; it is marked [`Provenance::Interpreted`].
pub fn free_energy_tail(cert: &MixingCertificate, sigma: Option<f64>, n_particles: usize) -> Result<TailCurve> {
    let big_n = check_n(n_particles)?;
    let (s, sc) = sigma_constant(sigma)?;
    let g = cert.g();
    let (tau11, kappa) = uniform_tau_bounds(cert, 1, 1)?;
    let (tau31, _) = uniform_tau_bounds(cert, 3, 1)?;
    let (tau22, _) = uniform_tau_bounds(cert, 2, 2)?;
    let c1 = (4.0 * g * tau11).powi(2) + 8.0 * g * tau31;
    let c2 = 4.0 * g * kappa / 3.0;
    let c3 = 4.0 * g * (2.0 * tau22 * s * s).sqrt();
    let constants = vec![
        c("c1", c1, Provenance::Certificate),
        c("c2", c2, Provenance::Interpreted),
        c("c3", c3, Provenance::Certificate),
        sc,
        c("N", big_n, Provenance::Supplied),
    ];
    Ok(TailCurve::new(
        "free-energy",
        move |x| (c1 * (1.0 + 2.0 * (x + x.sqrt())) + c2 * x) / big_n + c3 * x.sqrt() / big_n.sqrt(),
        constants,
    ))
}

/// Backward smoother bound for normalized additive functionals:
/// `c_2/N (1 + (L_0*)^{-1}(x)) + c_1 sigma^2 (L_1*)^{-1}(x / (N (n+1) sigma^2))` with
/// `c_1 = 2 g^m chi (tau^2 + m g^{2m-1} chi^3)`, `c_2 = 2 g^m chi c_1`, `tau` the density ratio.
pub fn backward_tail(cert: &MixingCertificate, tau_h: f64, sigma: Option<f64>, n_particles: usize, n: usize) -> Result<TailCurve> {
    let big_n = check_n(n_particles)?;
    let (s, sc) = sigma_constant(sigma)?;
    let MixingCertificate::Hm { m, chi_m, g } = *cert else {
        return Err(Error::InvalidArgument("backward bound needs an H_m certificate with m >= 1".into()));
    };
    if !(tau_h >= 1.0 && tau_h.is_finite()) {
        return Err(Error::InvalidArgument(format!("density ratio {tau_h} must be a finite number >= 1")));
    }
    let gm = g.powi(m as i32);
    let c1 = 2.0 * gm * chi_m * (tau_h * tau_h + m as f64 * g.powi(2 * m as i32 - 1) * chi_m.powi(3));
    let c2 = 2.0 * gm * chi_m * c1;
    let n1 = (n + 1) as f64;
    let constants = vec![
        c("c1", c1, Provenance::Certificate),
        c("c2", c2, Provenance::Certificate),
        c("tau_h", tau_h, Provenance::Certificate),
        sc,
        c("N", big_n, Provenance::Supplied),
        c("n", n as f64, Provenance::Supplied),
    ];
    Ok(TailCurve::new(
        "backward",
        move |x| c2 / big_n * (1.0 + inv_l_star(LegendreKind::L0, x)) + c1 * scaled_l1_inverse(s * s, x, big_n * n1),
        constants,
    ))
}

/// Uniform deviation over a class: `c_F tau_{1,1}(n) sqrt(x + log 2) / sqrt(N)`.
pub fn empirical_process_tail(cls: &CoverageClass, tau_11: f64, n_particles: usize) -> Result<TailCurve> {
    let big_n = check_n(n_particles)?;
    let c_f = empirical_process_constant(cls)?;
    let provenance = if matches!(cls, CoverageClass::Cells { .. }) { Provenance::NotCertified } else { Provenance::Supplied };
    let constants = vec![c("c_F", c_f, provenance), c("tau_1_1", tau_11, Provenance::Supplied), c("N", big_n, Provenance::Supplied)];
    Ok(TailCurve::new(
        "empirical-process",
        move |x| c_f * tau_11 * (x + std::f64::consts::LN_2).sqrt() / big_n.sqrt(),
        constants,
    ))
}
