use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const PROB_TOL: f64 = 1e-12;

/// A nonnegative measure on a finite set `{0, .., k-1}`.
///
/// Probability measures (`eta_n`) have mass 1; unnormalized ones (`gamma_n`) carry
/// their total mass in the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    weights: Vec<f64>,
}

impl Measure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty measure".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("measure weight {w} is not a nonnegative real")));
        }
        Ok(Self { weights })
    }

    /// A probability vector: nonnegative and summing to one within [`PROB_TOL`].
    pub fn probability(weights: Vec<f64>) -> Result<Self> {
        let m = Self::new(weights)?;
        let mass = m.mass();
        if (mass - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidArgument(format!("probability weights sum to {mass}")));
        }
        Ok(m)
    }

    pub fn dirac(size: usize, atom: usize) -> Self {
        let mut weights = vec![0.0; size];
        weights[atom] = 1.0;
        Self { weights }
    }

    pub fn uniform(size: usize) -> Self {
        Self { weights: vec![1.0 / size as f64; size] }
    }

    /// Build without validation; callers guarantee nonnegative finite weights.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `mu(f)`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.len(), "function and measure sizes differ");
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let mass = self.mass();
        if !(mass > 0.0) {
            return Err(Error::ZeroMass(mass));
        }
        Ok(Self { weights: self.weights.iter().map(|w| w / mass).collect() })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { weights: self.weights.iter().map(|w| w * c).collect() }
    }
}

/// `Psi_G(mu)(dx) = G(x) mu(dx) / mu(G)`.
pub fn boltzmann_gibbs(mu: &Measure, g: &[f64]) -> Result<Measure> {
    if g.len() != mu.len() {
        return Err(Error::SupportMismatch { left: mu.len(), right: g.len() });
    }
    let mass = mu.integrate(g);
    if !(mass > 0.0) {
        return Err(Error::ZeroMass(mass));
    }
    Ok(Measure::from_raw(mu.weights.iter().zip(g).map(|(w, v)| w * v / mass).collect()))
}

/// Row `x` of the selection kernel `S_{mu,G}(x, .) = G(x) delta_x + (1 - G(x)) Psi_G(mu)`.
pub fn selection_transport_kernel(mu: &Measure, g: &[f64], x: usize) -> Result<Measure> {
    let gx = g[x];
    if !(gx > 0.0 && gx <= 1.0) {
        return Err(Error::PotentialRange { time: 0, value: gx });
    }
    let psi = boltzmann_gibbs(mu, g)?;
    let mut row: Vec<f64> = psi.weights.iter().map(|w| (1.0 - gx) * w).collect();
    row[x] += gx;
    Ok(Measure::from_raw(row))
}

/// `mu S_{mu,G}`, which equals `Psi_G(mu)`; exposed so callers can check the identity.
pub fn transport(mu: &Measure, g: &[f64]) -> Result<Measure> {
    let mut out = vec![0.0; mu.len()];
    for (x, w) in mu.weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let row = selection_transport_kernel(mu, g, x)?;
        for (o, r) in out.iter_mut().zip(row.weights()) {
            *o += w * r;
        }
    }
    Ok(Measure::from_raw(out))
}

/// Total variation distance `1/2 sum |mu(x) - nu(x)|`.
pub fn total_variation(mu: &Measure, nu: &Measure) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::SupportMismatch { left: mu.len(), right: nu.len() });
    }
    Ok(0.5 * mu.weights.iter().zip(&nu.weights).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Uniform-weight measure carried by a list of atoms (particles, paths).
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical<S> {
    atoms: Vec<S>,
}

impl<S> Empirical<S> {
    pub fn new(atoms: Vec<S>) -> Self {
        assert!(!atoms.is_empty(), "empirical measure needs at least one atom");
        Self { atoms }
    }

    pub fn atoms(&self) -> &[S] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    pub fn expect<F: Fn(&S) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(f).sum::<f64>() / self.atoms.len() as f64
    }
}

impl Empirical<usize> {
    /// Frequency vector on `{0, .., size-1}`.
    pub fn to_measure(&self, size: usize) -> Measure {
        let mut w = vec![0.0; size];
        let unit = self.weight();
        for &a in &self.atoms {
            w[a] += unit;
        }
        Measure::from_raw(w)
    }
}
