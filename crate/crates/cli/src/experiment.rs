use std::path::Path;

use anyhow::{Context, Result};
use fkpm_core::experiments::{run_experiment_pooled, write_outputs, ExperimentConfig};

/// Returns whether every required verdict passed.
pub fn experiment(config: &Path, out: &Path) -> Result<bool> {
    let cfg = ExperimentConfig::load(config).with_context(|| format!("reading {}", config.display()))?;
    let outcome = run_experiment_pooled(&cfg)?;
    write_outputs(out, &cfg, &outcome).with_context(|| format!("writing into {}", out.display()))?;
    println!("{}: {}", out.display(), if outcome.passed { "PASS" } else { "FAIL" });
    Ok(outcome.passed)
}
