//! The mean-field particle model: selection, mutation, genealogies and free energies.

mod engine;
mod genealogy;
mod historical;
mod mcmc;

pub use engine::{
    evaluate_potentials, init, mutation_step, run, selection_step, step, step_detailed, EngineConfig, ParticlePopulation,
    RunOutput, Selection, StepOutcome, StepRecord,
};
pub use genealogy::Genealogy;
pub use historical::{historical_flow_exact, historical_lift, HistoricalModel};
pub use mcmc::{mcmc_regularized_mutation, stationarity_defect, FiniteMcmc, McmcKernel, STATIONARITY_TOL};
