//! Feynman-Kac models and their exact finite-state flows.

mod exact;
mod json;
mod measure;
mod model;

pub use exact::{PathMeasure, Unnormalized, DEFAULT_PATH_CAP};
pub use json::{load_model, model_to_json, parse_model, ModelFile, PerTime};
pub use measure::{boltzmann_gibbs, selection_transport_kernel, total_variation, transport, Empirical, Measure, PROB_TOL};
pub use model::{check_potential, FeynmanKac, FiniteModel};
pub(crate) use model::{cumulative, sample_cumulative};
