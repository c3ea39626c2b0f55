use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use fkpm_core::backward::{AdditiveFunctional, TrajectoryStore};
use fkpm_core::fk::{load_model, model_to_json, FeynmanKac, FiniteModel};
use fkpm_core::particle::{run as run_particles, EngineConfig, RunOutput};
use serde::{Deserialize, Serialize};

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n_particles: usize,
    /// Defaults to the model horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long)]
    pub retain_genealogy: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Also save the generations here for `fkpm smooth` (implies --retain-genealogy).
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SmoothArgs {
    /// Directory written by `fkpm run --run-dir`.
    #[arg(long)]
    pub run: PathBuf,
    /// JSON `{"components": ["f_0", .., "f_n"] | {"stationary": "f"}, "normalized": bool}`.
    #[arg(long)]
    pub functional: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Generations of a finished run, as saved in `run.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedRun {
    pub seed: u64,
    pub n_particles: usize,
    pub epsilon: f64,
    pub horizon: usize,
    /// `None` when every particle died (`Z^N = 0`).
    pub log_z: Option<f64>,
    pub states: Vec<Vec<usize>>,
    pub ancestors: Vec<Vec<usize>>,
    pub potentials: Vec<Vec<f64>>,
}

pub fn run(args: &RunArgs) -> Result<()> {
    let model = load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let horizon = args.horizon.unwrap_or(model.horizon());
    let retain = args.retain_genealogy || args.run_dir.is_some();
    let config = EngineConfig::new(args.n_particles).epsilon(args.epsilon).retain_genealogy(retain);
    let names: Vec<String> = model.functionals().keys().cloned().collect();
    let out = run_particles(&model, &config, horizon, args.seed, |pop| {
        model.functionals().values().map(|f| pop.mean(|x| f[*x])).collect()
    })?;
    let mut w = csv::Writer::from_path(&args.out)?;
    let mut header = vec!["step".to_string()];
    header.extend(names.iter().map(|n| format!("eta_hat_{n}")));
    header.extend(["log_Z_hat", "ess", "wall_ns"].map(String::from));
    w.write_record(&header)?;
    for r in &out.records {
        let mut row = vec![r.step.to_string()];
        row.extend(r.functionals.iter().map(f64::to_string));
        row.extend([r.log_z.to_string(), r.ess.to_string(), r.wall_ns.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    if let Some(dir) = &args.run_dir {
        save_run(dir, &model, args, horizon, &out)?;
    }
    Ok(())
}

fn save_run(dir: &Path, model: &FiniteModel, args: &RunArgs, horizon: usize, out: &RunOutput<usize>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("model.json"), model_to_json(model)?)?;
    let g = &out.genealogy;
    let potentials = (0..horizon).map(|p| Ok(g.potentials(p)?.map(<[f64]>::to_vec).unwrap_or_default())).collect::<Result<Vec<_>>>()?;
    let log_z = out.population.log_free_energy;
    let saved = SavedRun {
        seed: args.seed,
        n_particles: args.n_particles,
        epsilon: args.epsilon,
        horizon,
        log_z: log_z.is_finite().then_some(log_z),
        states: g.states()?.to_vec(),
        ancestors: g.ancestors().to_vec(),
        potentials,
    };
    std::fs::write(dir.join("run.json"), serde_json::to_string(&saved)?)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Components {
    Stationary { stationary: String },
    Sequence(Vec<String>),
}

#[derive(Debug, Deserialize)]
struct AdditiveSpec {
    components: Components,
    #[serde(default)]
    normalized: bool,
}

pub fn smooth(args: &SmoothArgs) -> Result<()> {
    let model = load_model(args.run.join("model.json"))?;
    let saved: SavedRun = serde_json::from_str(&std::fs::read_to_string(args.run.join("run.json"))?)?;
    let spec: AdditiveSpec = serde_json::from_str(&std::fs::read_to_string(&args.functional)?)
        .with_context(|| format!("parsing {}", args.functional.display()))?;
    let n = saved.horizon;
    let names = match spec.components {
        Components::Stationary { stationary } => vec![stationary; n + 1],
        Components::Sequence(v) if v.len() == n + 1 => v,
        Components::Sequence(v) => bail!("functional lists {} components for {} generations", v.len(), n + 1),
    };
    let table = names
        .iter()
        .map(|name| model.functional(name).map(<[f64]>::to_vec).with_context(|| format!("model has no functional {name:?}")))
        .collect::<Result<Vec<_>>>()?;
    let store = TrajectoryStore::new(&model, saved.states.clone(), saved.potentials, saved.log_z.unwrap_or(f64::NEG_INFINITY))?;
    let marginals = store.backward_marginals()?;
    let f = AdditiveFunctional::from_table(table.clone(), spec.normalized);
    let total = store.smoothed_additive(&f)?;
    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record(["p", "component", "value"])?;
    for (p, weights) in marginals.iter().enumerate() {
        let v: f64 = weights.iter().zip(&saved.states[p]).map(|(wt, x)| wt * table[p][*x]).sum();
        w.write_record([p.to_string(), names[p].clone(), v.to_string()])?;
    }
    let label = if spec.normalized { "normalized_sum" } else { "sum" };
    w.write_record([label.to_string(), String::new(), total.to_string()])?;
    w.write_record(["log_Z_hat".to_string(), String::new(), store.log_free_energy().to_string()])?;
    w.flush()?;
    Ok(())
}
