//! Feynman-Kac particle methods on finite and general state spaces.
//!
//! * [`fk`]: models, measures and exact flows on finite spaces.
//! * [`particle`]: the mean-field particle engine and genealogies.
//! * [`backward`]: backward particle smoothing.
//! * [`semigroup`]: stability profiles and mixing certificates.
//! * [`bounds`]: concentration inequalities as evaluable tail curves.
//! * [`zoo`]: reference models with closed-form or exact answers.
//! * [`experiments`]: ensemble, coverage and convergence harness.

pub mod backward;
pub mod bounds;
pub mod error;
pub mod experiments;
pub mod fk;
pub mod particle;
pub mod rng;
pub mod semigroup;
pub mod zoo;

pub use error::{Error, Result};
