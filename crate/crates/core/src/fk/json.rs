//! JSON model description files.
//!
//! ```json
//! {
//!   "horizon": 3,
//!   "states": ["a", "b"],
//!   "eta0": [0.5, 0.5],
//!   "kernels": {"stationary": [[0.9, 0.1], [0.2, 0.8]]},
//!   "potentials": [[1.0, 0.5], [0.5, 1.0], [1.0, 1.0], [1.0, 1.0]],
//!   "functionals": {"indicator_a": [1.0, 0.0]}
//! }
//! ```
//!
//! `kernels` lists `M_1..M_n`, `potentials` lists `G_0..G_n`; either may be given as
//! `{"stationary": ...}` to broadcast one value over all times.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::measure::Measure;
use super::model::{FeynmanKac, FiniteModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PerTime<T> {
    Stationary { stationary: T },
    Sequence(Vec<T>),
}

impl<T: Clone> PerTime<T> {
    fn expand(&self, count: usize, what: &str) -> Result<Vec<T>> {
        match self {
            PerTime::Stationary { stationary } => Ok(vec![stationary.clone(); count]),
            PerTime::Sequence(v) if v.len() == count => Ok(v.clone()),
            PerTime::Sequence(v) => Err(Error::InvalidModel(format!("{what}: expected {count} entries, got {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub horizon: usize,
    pub states: Vec<String>,
    pub eta0: Vec<f64>,
    pub kernels: PerTime<Vec<Vec<f64>>>,
    pub potentials: PerTime<Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub functionals: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_zero_potentials: bool,
}

impl ModelFile {
    pub fn into_model(self) -> Result<FiniteModel> {
        let k = self.states.len();
        let kernels = self
            .kernels
            .expand(self.horizon, "kernels")?
            .into_iter()
            .enumerate()
            .map(|(i, rows)| {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(Error::InvalidModel(format!("kernel M_{} is not {k}x{k}", i + 1)));
                }
                Ok(DMatrix::from_row_iterator(k, k, rows.into_iter().flatten()))
            })
            .collect::<Result<Vec<_>>>()?;
        let potentials = self.potentials.expand(self.horizon + 1, "potentials")?;
        let eta0 = Measure::probability(self.eta0)?;
        let model = if self.allow_zero_potentials {
            FiniteModel::with_hard_potentials(eta0, kernels, potentials)?
        } else {
            FiniteModel::new(eta0, kernels, potentials)?
        };
        let mut model = model.with_labels(self.states)?;
        for (name, values) in self.functionals {
            model = model.with_functional(name, values)?;
        }
        Ok(model)
    }

    pub fn from_model(model: &FiniteModel) -> Self {
        let k = model.num_states();
        let kernels: Vec<Vec<Vec<f64>>> = model
            .kernels()
            .iter()
            .map(|m| (0..k).map(|r| m.row(r).iter().copied().collect()).collect())
            .collect();
        let potentials = model.potentials().to_vec();
        Self {
            horizon: model.horizon(),
            states: model.labels().to_vec(),
            eta0: model.eta0().weights().to_vec(),
            kernels: compress(kernels),
            potentials: compress(potentials),
            functionals: model.functionals().clone(),
            allow_zero_potentials: model.hard_potentials(),
        }
    }
}

fn compress<T: PartialEq + Clone>(v: Vec<T>) -> PerTime<T> {
    match v.first() {
        Some(first) if v.len() > 1 && v.iter().all(|x| x == first) => PerTime::Stationary { stationary: first.clone() },
        _ => PerTime::Sequence(v),
    }
}

pub fn parse_model(text: &str) -> Result<FiniteModel> {
    serde_json::from_str::<ModelFile>(text)?.into_model()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FiniteModel> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn model_to_json(model: &FiniteModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from_model(model))?)
}
