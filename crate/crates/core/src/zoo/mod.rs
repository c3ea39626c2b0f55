//! Canonical Feynman-Kac instances with exact or closed-form reference values.

mod annealing;
mod clock;
mod doob;
mod fixtures;
mod gaussian;
mod hmm;
mod restriction;
mod saw;

use serde::{Deserialize, Serialize};

pub use annealing::{annealing_schedule_tuner, boltzmann_marginal, doeblin_constant, metropolis_kernel, simulated_annealing};
pub use clock::{clock_kernel, geometric_clock_discretization};
pub use doob::{absorption_doob, fit_tv_decay, DoobAnalysis, TvDecay};
pub use fixtures::{catalog, clock, doob5, fixture, hmm4, linear_gaussian, saw, CatalogEntry};
pub use gaussian::{kalman_predictor, KalmanStep, LinearGaussian};
pub use hmm::finite_hmm;
pub use restriction::subset_restriction;
pub use saw::{count_self_avoiding, ENUMERATION_LIMIT, self_avoiding_walk, SelfAvoidingWalk};

/// Which exact procedure produced a reference value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    /// Exact flow recursion of the finite model.
    ExactFlow,
    /// Kalman predictor recursion.
    Kalman,
    /// Exhaustive enumeration.
    Enumeration,
    /// Dense eigen-decomposition / power iteration.
    Eigen,
    /// Closed-form expression of the model parameters.
    ClosedForm,
}

/// A named reference quantity together with the oracle that computed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub name: String,
    pub value: f64,
    pub oracle: Oracle,
}

/// A model, its oracle and its reference quantities.
///
/// `log_rescale[n]` is `sum_{p<n} log c_p` where `c_p` was divided out of `G_p` to bring it
/// into `(0, 1]`; the original normalizing constant is `Z_n exp(log_rescale[n])`.
#[derive(Debug, Clone)]
pub struct ZooModel<M> {
    pub name: String,
    pub model: M,
    pub oracle: Oracle,
    pub references: Vec<Reference>,
    pub log_rescale: Vec<f64>,
}

impl<M> ZooModel<M> {
    pub fn reference(&self, name: &str) -> Option<f64> {
        self.references.iter().find(|r| r.name == name).map(|r| r.value)
    }

    fn push(&mut self, name: impl Into<String>, value: f64, oracle: Oracle) {
        self.references.push(Reference { name: name.into(), value, oracle });
    }
}

/// JSON sidecar describing the reference values of an emitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSidecar {
    pub name: String,
    pub oracle: Oracle,
    pub references: Vec<Reference>,
    pub log_rescale: Vec<f64>,
}

impl<M> From<&ZooModel<M>> for OracleSidecar {
    fn from(z: &ZooModel<M>) -> Self {
        Self { name: z.name.clone(), oracle: z.oracle, references: z.references.clone(), log_rescale: z.log_rescale.clone() }
    }
}

/// Reference values shared by all finite zoo models: `Z_p` and `eta_p(f)` for each functional.
fn exact_references(zoo: &mut ZooModel<crate::fk::FiniteModel>) -> crate::Result<()> {
    use crate::fk::FeynmanKac;
    let horizon = zoo.model.horizon();
    let flow = zoo.model.flow_exact(horizon)?;
    let mut log_z = 0.0;
    for (p, eta) in flow.iter().enumerate() {
        zoo.push(format!("log_Z_{p}"), log_z, Oracle::ExactFlow);
        let functionals: Vec<(String, f64)> =
            zoo.model.functionals().iter().map(|(name, f)| (format!("eta_{p}({name})"), eta.integrate(f))).collect();
        for (name, v) in functionals {
            zoo.push(name, v, Oracle::ExactFlow);
        }
        log_z += eta.integrate(zoo.model.potential_vec(p)).ln();
    }
    Ok(())
}
