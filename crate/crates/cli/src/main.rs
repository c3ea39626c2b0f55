//! `fkpm`: run particle models, smooth, analyze semigroups, evaluate bounds and run experiments.

mod analyze;
mod experiment;
mod run;
mod zoo;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "fkpm", version, about = "Feynman-Kac particle models and their concentration bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the particle model and write per-step estimates.
    Run(run::RunArgs),
    /// Backward-smooth an additive functional over a saved run.
    Smooth(run::SmoothArgs),
    /// Exact contraction profile, mixing certificate and dominance check.
    Analyze(analyze::AnalyzeArgs),
    /// Evaluate a tail bound on an x grid.
    Bounds(analyze::BoundsArgs),
    /// Reference models.
    Zoo {
        #[command(subcommand)]
        command: zoo::ZooCommand,
    },
    /// Ensemble, coverage and sweep experiment.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::run(&args).map(|_| true),
        Command::Smooth(args) => run::smooth(&args).map(|_| true),
        Command::Analyze(args) => analyze::analyze(&args).map(|_| true),
        Command::Bounds(args) => analyze::bounds(&args).map(|_| true),
        Command::Zoo { command } => zoo::zoo(&command).map(|_| true),
        Command::Experiment { config, out } => experiment::experiment(&config, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
