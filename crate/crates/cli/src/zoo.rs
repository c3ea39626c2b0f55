use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Subcommand;
use fkpm_core::fk::model_to_json;
use fkpm_core::zoo::{catalog, fixture, OracleSidecar};

#[derive(Subcommand)]
pub enum ZooCommand {
    /// List the available models.
    List,
    /// Write a model file and its `<stem>.oracle.json` sidecar.
    Emit {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    out.with_file_name(format!("{stem}.oracle.json"))
}

pub fn zoo(cmd: &ZooCommand) -> Result<()> {
    match cmd {
        ZooCommand::List => {
            for e in catalog() {
                let kind = if e.emittable { "finite" } else { "continuous" };
                println!("{:<24} {:<11} {}", e.name, kind, e.description);
            }
        }
        ZooCommand::Emit { name, out } => {
            if let Some(e) = catalog().iter().find(|e| e.name == name) {
                if !e.emittable {
                    bail!("{name} has no finite-state model file");
                }
            }
            let z = fixture(name)?;
            std::fs::write(out, model_to_json(&z.model)?)?;
            let side = sidecar_path(out);
            std::fs::write(&side, serde_json::to_string_pretty(&OracleSidecar::from(&z))?)?;
            println!("wrote {} and {}", out.display(), side.display());
        }
    }
    Ok(())
}
