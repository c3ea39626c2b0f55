//! Stability of Feynman-Kac semigroups on finite spaces.
//!
//! For `p <= n` let `Q_{p,n} = Q_{p+1} .. Q_n`, `G_{p,n} = Q_{p,n}(1)` and
//! `P_{p,n}(f) = Q_{p,n}(f) / Q_{p,n}(1)`. The profile records
//! `g_{p,n} = sup G_{p,n} / inf G_{p,n}` and the Dobrushin coefficient `beta(P_{p,n})`,
//! which control every concentration constant downstream.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::{FeynmanKac, FiniteModel};

/// `beta(M) = max_{x, x'} ||M(x, .) - M(x', .)||_tv`.
pub fn dobrushin(m: &DMatrix<f64>) -> f64 {
    let k = m.nrows();
    let mut best: f64 = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            let tv: f64 = 0.5 * m.row(a).iter().zip(m.row(b).iter()).map(|(x, y)| (x - y).abs()).sum::<f64>();
            best = best.max(tv);
        }
    }
    best
}

fn ratio(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// `Q_{p,n}`, `G_{p,n}` and `P_{p,n}` for one pair `p <= n`.
#[derive(Debug, Clone)]
pub struct Semigroup {
    pub q: DMatrix<f64>,
    pub g: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl Semigroup {
    fn from_q(q: DMatrix<f64>) -> Self {
        let g = q.column_sum();
        let mut p = q.clone();
        for (r, gr) in g.iter().enumerate() {
            p.row_mut(r).unscale_mut(*gr);
        }
        Self { q, g, p }
    }

    pub fn g_ratio(&self) -> f64 {
        ratio(self.g.as_slice())
    }

    pub fn beta(&self) -> f64 {
        dobrushin(&self.p)
    }
}

pub fn semigroup_qpn(model: &FiniteModel, p: usize, n: usize) -> Result<Semigroup> {
    if p > n || n > model.horizon() {
        return Err(Error::InvalidArgument(format!("need p <= n <= {}, got p = {p}, n = {n}", model.horizon())));
    }
    Ok(Semigroup::from_q(model.semigroup_product(p, n)))
}

/// Exact `g_{p,n}` and `beta(P_{p,n})` for all `0 <= p <= n <= horizon`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ContractionProfile {
    pub horizon: usize,
    /// `g[n][p] = g_{p,n}`, `p = 0..=n`.
    pub g: Vec<Vec<f64>>,
    /// `beta[n][p] = beta(P_{p,n})`.
    pub beta: Vec<Vec<f64>>,
}

impl ContractionProfile {
    pub fn compute(model: &FiniteModel, horizon: usize) -> Result<Self> {
        if horizon > model.horizon() {
            return Err(Error::InvalidArgument(format!("horizon {horizon} exceeds model horizon {}", model.horizon())));
        }
        let k = model.num_states();
        let mut g = Vec::with_capacity(horizon + 1);
        let mut beta = Vec::with_capacity(horizon + 1);
        for n in 0..=horizon {
            let mut gn = vec![0.0; n + 1];
            let mut bn = vec![0.0; n + 1];
            let mut q = DMatrix::identity(k, k);
            for p in (0..=n).rev() {
                if p < n {
                    q = model.q_matrix(p + 1) * q;
                }
                let s = Semigroup::from_q(q.clone());
                gn[p] = s.g_ratio();
                bn[p] = s.beta();
            }
            g.push(gn);
            beta.push(bn);
        }
        Ok(Self { horizon, g, beta })
    }

    pub fn g_pn(&self, p: usize, n: usize) -> f64 {
        self.g[n][p]
    }

    pub fn beta_pn(&self, p: usize, n: usize) -> f64 {
        self.beta[n][p]
    }

    /// `tau_{k,l}(n) = sum_{p<=n} g_{p,n}^k beta(P_{p,n})^l`.
    pub fn tau(&self, k: i32, l: i32, n: usize) -> f64 {
        (0..=n).map(|p| self.g[n][p].powi(k) * self.beta[n][p].powi(l)).sum()
    }

    /// `kappa(n) = max_p g_{p,n} beta(P_{p,n})`.
    pub fn kappa(&self, n: usize) -> f64 {
        (0..=n).map(|p| self.g[n][p] * self.beta[n][p]).fold(0.0, f64::max)
    }
}

pub fn tau_kappa(profile: &ContractionProfile, k: i32, l: i32, n: usize) -> (f64, f64) {
    (profile.tau(k, l, n), profile.kappa(n))
}

/// A quantitative mixing condition on the kernels and potentials of a model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind")]
pub enum MixingCertificate {
    /// `M_{n,n+m}(x, .) <= chi_m M_{n,n+m}(x', .)` and `G_n(x) <= g G_n(x')`.
    Hm { m: usize, chi_m: f64, g: f64 },
    /// `rho = sup_n g_n beta(M_{n+1})`.
    H0 { rho: f64, g: f64 },
}

impl MixingCertificate {
    pub fn g(&self) -> f64 {
        match *self {
            MixingCertificate::Hm { g, .. } | MixingCertificate::H0 { g, .. } => g,
        }
    }

    /// H_0 certificates are only usable with `rho < 1`.
    pub fn is_valid(&self) -> bool {
        match *self {
            MixingCertificate::Hm { chi_m, g, .. } => chi_m.is_finite() && g.is_finite(),
            MixingCertificate::H0 { rho, g } => rho < 1.0 && g.is_finite(),
        }
    }

    /// `chi_m g^m` (H_m only).
    pub fn chi_g(&self) -> Option<f64> {
        match *self {
            MixingCertificate::Hm { m, chi_m, g } => Some(chi_m * g.powi(m as i32)),
            MixingCertificate::H0 { .. } => None,
        }
    }

    fn require_valid(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("certificate {self:?} does not yield contraction")))
        }
    }
}

/// `sup_n max G_n / min G_n` over `0 <= n < horizon`, the potentials entering `Q_{p,n}`.
fn potential_ratio(model: &FiniteModel, horizon: usize) -> f64 {
    (0..horizon.max(1)).map(|n| ratio(model.potential_vec(n))).fold(1.0, f64::max)
}

/// Scan every window `M_{n+1} .. M_{n+m}` inside the horizon for the largest ratio.
pub fn certify_hm(model: &FiniteModel, m: usize) -> Result<MixingCertificate> {
    let horizon = model.horizon();
    if m == 0 || m > horizon {
        return Err(Error::InvalidArgument(format!("window length m = {m} must lie in 1..={horizon}")));
    }
    let k = model.num_states();
    let mut chi: f64 = 1.0;
    for start in 0..=horizon - m {
        let w = (start + 1..=start + m).fold(DMatrix::identity(k, k), |acc, q| acc * model.kernel(q));
        for y in 0..k {
            let col = w.column(y);
            let positive = col.iter().filter(|v| **v > 0.0).count();
            if positive != 0 && positive != k {
                return Err(Error::NotMixing { window: start });
            }
            if positive == k {
                chi = chi.max(ratio(col.as_slice()));
            }
        }
    }
    Ok(MixingCertificate::Hm { m, chi_m: chi, g: potential_ratio(model, horizon) })
}

/// `rho = sup_n g_n beta(M_{n+1})` over the horizon. Check [`MixingCertificate::is_valid`].
pub fn certify_h0(model: &FiniteModel) -> Result<MixingCertificate> {
    let horizon = model.horizon();
    if horizon == 0 {
        return Err(Error::InvalidArgument("H_0 needs at least one transition".into()));
    }
    let rho = (0..horizon).map(|n| ratio(model.potential_vec(n)) * dobrushin(model.kernel(n + 1))).fold(0.0, f64::max);
    Ok(MixingCertificate::H0 { rho, g: potential_ratio(model, horizon) })
}

/// `tau = max_{n, x, y, y'} H_n(x, y) / H_n(x, y')` for counting-measure densities.
pub fn density_ratio(model: &FiniteModel) -> Result<f64> {
    let mut tau: f64 = 1.0;
    for (i, m) in model.kernels().iter().enumerate() {
        for r in 0..m.nrows() {
            let row: Vec<f64> = m.row(r).iter().copied().collect();
            if row.iter().any(|v| *v <= 0.0) {
                return Err(Error::NotMixing { window: i });
            }
            tau = tau.max(ratio(&row));
        }
    }
    Ok(tau)
}

/// `(g_{p,n} bound, beta(P_{p,n}) bound)` under H_m.
pub fn hm_bounds(cert: &MixingCertificate, p: usize, n: usize) -> Result<(f64, f64)> {
    let MixingCertificate::Hm { m, chi_m, g } = *cert else {
        return Err(Error::InvalidArgument("hm_bounds needs an H_m certificate".into()));
    };
    cert.require_valid()?;
    let k = (n.saturating_sub(p) / m) as i32;
    let contraction = 1.0 - g.powi(-(m as i32 - 1)) / (chi_m * chi_m);
    Ok((chi_m * g.powi(m as i32), contraction.powi(k)))
}

/// `(g_{p,n} bound, beta(P_{p,n}) bound)` under H_0.
pub fn h0_bounds(cert: &MixingCertificate, p: usize, n: usize) -> Result<(f64, f64)> {
    let MixingCertificate::H0 { rho, g } = *cert else {
        return Err(Error::InvalidArgument("h0_bounds needs an H_0 certificate".into()));
    };
    cert.require_valid()?;
    let d = n.saturating_sub(p) as i32;
    let g_bound = ((g - 1.0) * (1.0 - rho.powi(d)) / (1.0 - rho)).exp();
    Ok((g_bound, rho.powi(d)))
}

/// Bounds for either certificate kind.
pub fn certificate_bounds(cert: &MixingCertificate, p: usize, n: usize) -> Result<(f64, f64)> {
    match cert {
        MixingCertificate::Hm { .. } => hm_bounds(cert, p, n),
        MixingCertificate::H0 { .. } => h0_bounds(cert, p, n),
    }
}

/// Horizon-free `(tau_bar_{k,l}, kappa_bar)` bounding `tau_{k,l}(n)` and `kappa(n)` for all `n`.
pub fn uniform_tau_bounds(cert: &MixingCertificate, k: i32, l: i32) -> Result<(f64, f64)> {
    cert.require_valid()?;
    match *cert {
        MixingCertificate::Hm { m, chi_m, g } => {
            let cg = chi_m * g.powi(m as i32);
            let contraction = 1.0 - g.powi(-(m as i32 - 1)) / (chi_m * chi_m);
            let denom = 1.0 - contraction.powi(l);
            let tau = if denom > 0.0 { m as f64 * cg.powi(k) / denom } else { f64::INFINITY };
            Ok((tau, cg))
        }
        MixingCertificate::H0 { rho, g } => {
            let spread = (g - 1.0) / (1.0 - rho);
            let denom = 1.0 - rho.powi(l);
            let tau = if denom > 0.0 { (k as f64 * spread).exp() / denom } else { f64::INFINITY };
            Ok((tau, spread.exp()))
        }
    }
}

/// Path-space bounds `(tau_{k,l}(n), kappa(n))` for the historical model under H_m.
pub fn historical_profile(cert: &MixingCertificate, k: i32, n: usize) -> Result<(f64, f64)> {
    let cg = cert.chi_g().ok_or_else(|| Error::InvalidArgument("historical bounds need an H_m certificate".into()))?;
    cert.require_valid()?;
    Ok(((n + 1) as f64 * cg.powi(k), cg))
}

/// A pair `(p, n)` where an exact value exceeded its certified bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Violation {
    pub p: usize,
    pub n: usize,
    pub quantity: Quantity,
    pub exact: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    G,
    Beta,
    Tau,
    Kappa,
}

/// Compare an exact profile to the bounds of a certificate; `rel_tol` absorbs rounding.
pub fn dominance_violations(profile: &ContractionProfile, cert: &MixingCertificate, taus: &[(i32, i32)], rel_tol: f64) -> Result<Vec<Violation>> {
    let exceeds = |exact: f64, bound: f64| exact > bound * (1.0 + rel_tol) + rel_tol;
    let mut out = Vec::new();
    for n in 0..=profile.horizon {
        for p in 0..=n {
            let (gb, bb) = certificate_bounds(cert, p, n)?;
            let (ge, be) = (profile.g_pn(p, n), profile.beta_pn(p, n));
            if exceeds(ge, gb) {
                out.push(Violation { p, n, quantity: Quantity::G, exact: ge, bound: gb });
            }
            if exceeds(be, bb) {
                out.push(Violation { p, n, quantity: Quantity::Beta, exact: be, bound: bb });
            }
        }
        for &(k, l) in taus {
            let (tb, kb) = uniform_tau_bounds(cert, k, l)?;
            let te = profile.tau(k, l, n);
            if exceeds(te, tb) {
                out.push(Violation { p: k as usize, n, quantity: Quantity::Tau, exact: te, bound: tb });
            }
            let ke = profile.kappa(n);
            if exceeds(ke, kb) {
                out.push(Violation { p: 0, n, quantity: Quantity::Kappa, exact: ke, bound: kb });
            }
        }
    }
    Ok(out)
}
