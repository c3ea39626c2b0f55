//! Convex Laplace-type functions and their Legendre-Fenchel transforms.

use crate::error::{Error, Result};

/// The convex increasing functions used to encode log-Laplace estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LegendreKind {
    /// `L(t) = t^2 / (1 - t)` on `[0, 1)`.
    L,
    /// `L_0(t) = -t - log(1 - 2t) / 2` on `[0, 1/2)`.
    L0,
    /// `L_1(t) = e^t - 1 - t`.
    L1,
    /// `L_{a,b}(t) = b / (2 a^2) L(a t)`; Gaussian `b t^2 / 2` when `a = 0`.
    Lab { a: f64, b: f64 },
}

impl LegendreKind {
    /// Right end of the domain of `L` (infinite for `L_1`).
    pub fn domain_end(&self) -> f64 {
        match *self {
            LegendreKind::L => 1.0,
            LegendreKind::L0 => 0.5,
            LegendreKind::L1 => f64::INFINITY,
            LegendreKind::Lab { a, .. } if a > 0.0 => 1.0 / a,
            LegendreKind::Lab { .. } => f64::INFINITY,
        }
    }

    /// `L(t)` for `0 <= t` inside the domain, `+inf` beyond it.
    pub fn value(&self, t: f64) -> f64 {
        if t >= self.domain_end() {
            return f64::INFINITY;
        }
        match *self {
            LegendreKind::L => t * t / (1.0 - t),
            LegendreKind::L0 => -t - 0.5 * (-2.0 * t).ln_1p(),
            LegendreKind::L1 => t.exp_m1() - t,
            LegendreKind::Lab { a, b } if a > 0.0 => b / (2.0 * a * a) * LegendreKind::L.value(a * t),
            LegendreKind::Lab { b, .. } => 0.5 * b * t * t,
        }
    }
}

/// `L*(lambda) = sup_t (lambda t - L(t))`, in closed form.
pub fn l_star(kind: LegendreKind, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::NegativeLambda(lambda));
    }
    Ok(match kind {
        LegendreKind::L => ((lambda + 1.0).sqrt() - 1.0).powi(2),
        LegendreKind::L0 => 0.5 * (lambda - lambda.ln_1p()),
        LegendreKind::L1 => (1.0 + lambda) * lambda.ln_1p() - lambda,
        LegendreKind::Lab { a, b } if a > 0.0 => {
            // L_1(t) = u L_2(v t) gives L_1*(lambda) = u L_2*(lambda / (u v)).
            let u = b / (2.0 * a * a);
            u * l_star(LegendreKind::L, lambda / (u * a))?
        }
        LegendreKind::Lab { b, .. } => lambda * lambda / (2.0 * b),
    })
}

/// `(L*)^{-1}(x)`, closed form for `L` and `L_{a,b}`, bisection otherwise.
pub fn inv_l_star(kind: LegendreKind, x: f64) -> f64 {
    assert!(x >= 0.0, "inverse Legendre transform needs x >= 0, got {x}");
    if x == 0.0 {
        return 0.0;
    }
    match kind {
        LegendreKind::L => x + 2.0 * x.sqrt(),
        LegendreKind::Lab { a, b } => a * x + (2.0 * b * x).sqrt(),
        LegendreKind::L0 | LegendreKind::L1 => bisect(|l| l_star(kind, l).expect("lambda is nonnegative"), x),
    }
}

/// Solve `f(lambda) = x` for increasing `f` with `f(0) = 0`, to `1e-12` relative.
fn bisect(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let mut hi = 1.0;
    while f(hi) < x {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coefficients `(a, b)` with `u (L_0*)^{-1}(x) + v (L_1*)^{-1}(x) <= a x + sqrt(2 b x)`.
pub fn bernstein_coefficients(u: f64, v: f64) -> (f64, f64) {
    (2.0 * u + v / 3.0, (std::f64::consts::SQRT_2 * u + v).powi(2))
}

/// Tail form of "`X <= a x + sqrt(2 b x) + c` with probability at least `1 - e^{-x}`":
/// `P(X > y + c) <= exp(-y^2 / (2 (b + a y)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinTail {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn bernstein_convert(a: f64, b: f64, c: f64) -> BernsteinTail {
    BernsteinTail { a, b, c }
}

impl BernsteinTail {
    /// Upper bound on `P(X > y + c)`.
    pub fn exceedance(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        (-y * y / (2.0 * (self.b + self.a * y))).exp()
    }

    /// Lower bound on `P(X <= y + c)`.
    pub fn probability(&self, y: f64) -> f64 {
        1.0 - self.exceedance(y)
    }

    /// The deviation level at confidence `1 - e^{-x}`.
    pub fn threshold(&self, x: f64) -> f64 {
        self.a * x + (2.0 * self.b * x).sqrt() + self.c
    }
}
