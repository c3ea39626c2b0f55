use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use fkpm_core::bounds::{backward_tail, free_energy_tail, genealogical_tail, marginal_tail, uniform_marginal_tail, TailCurve};
use fkpm_core::fk::{load_model, FeynmanKac};
use fkpm_core::semigroup::{certify_h0, certify_hm, density_ratio, dominance_violations, ContractionProfile, MixingCertificate, Violation};
use serde::{Deserialize, Serialize};

/// `tau_{k,l}` pairs checked against the uniform certificate bounds.
const TAUS: [(i32, i32); 4] = [(1, 1), (2, 1), (2, 2), (3, 1)];
const REL_TOL: f64 = 1e-12;

#[derive(Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Defaults to the model horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Mixing lag; 0 selects the one-step contraction certificate.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

/// Contents of `profile.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisFile {
    pub horizon: usize,
    pub m: usize,
    pub profile: ContractionProfile,
    pub certificate: Option<MixingCertificate>,
    pub certificate_error: Option<String>,
    /// `None` when the kernels have no positive density.
    pub density_ratio: Option<f64>,
    pub violations: Vec<Violation>,
    pub dominance: Verdict,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let model = load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let horizon = args.horizon.unwrap_or(model.horizon());
    let model = model.truncated(horizon)?;
    let profile = ContractionProfile::compute(&model, horizon)?;
    let cert = if args.m == 0 { certify_h0(&model) } else { certify_hm(&model, args.m) };
    let (certificate, certificate_error) = match cert {
        Ok(c) if c.is_valid() => (Some(c), None),
        Ok(c) => (None, Some(format!("certificate {c:?} does not hold"))),
        Err(e) => (None, Some(e.to_string())),
    };
    let (violations, dominance) = match &certificate {
        Some(c) => {
            let v = dominance_violations(&profile, c, &TAUS, REL_TOL)?;
            let verdict = if v.is_empty() { Verdict::Pass } else { Verdict::Fail };
            (v, verdict)
        }
        None => (Vec::new(), Verdict::Skipped),
    };
    let file = AnalysisFile {
        horizon,
        m: args.m,
        profile,
        certificate,
        certificate_error,
        density_ratio: density_ratio(&model).ok(),
        violations,
        dominance,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&file)?)?;
    println!("dominance: {:?}", file.dominance);
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Which {
    Marginal,
    Uniform,
    Tree,
    FreeEnergy,
    Backward,
}

#[derive(Args)]
pub struct BoundsArgs {
    /// `profile.json` written by `fkpm analyze`.
    #[arg(long)]
    pub cert: PathBuf,
    #[arg(long, value_enum)]
    pub which: Which,
    #[arg(long = "N")]
    pub n_particles: usize,
    /// Time horizon; defaults to the analyzed horizon.
    #[arg(long)]
    pub n: Option<usize>,
    /// `start:stop:step`, both ends included.
    #[arg(long, default_value = "0:5:0.1")]
    pub x_grid: String,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec.split(':').map(str::parse).collect::<Result<_, _>>().with_context(|| format!("bad grid {spec:?}"))?;
    let [a, b, step] = parts[..] else { bail!("grid must be start:stop:step, got {spec:?}") };
    if !(step > 0.0 && a <= b && a.is_finite() && b.is_finite()) {
        bail!("grid needs start <= stop and step > 0, got {spec:?}");
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| a + i as f64 * step).collect())
}

fn curve(file: &AnalysisFile, args: &BoundsArgs) -> Result<TailCurve> {
    let n = args.n.unwrap_or(file.horizon);
    let cert = || file.certificate.with_context(|| format!("no valid certificate: {}", file.certificate_error.as_deref().unwrap_or("missing")));
    Ok(match args.which {
        Which::Marginal => {
            if n > file.profile.horizon {
                bail!("n = {n} exceeds analyzed horizon {}", file.profile.horizon);
            }
            let sigma = args.sigma.map(|s| vec![s; n + 1]);
            marginal_tail(&file.profile, sigma.as_deref(), args.n_particles, n, None)?
        }
        Which::Uniform => uniform_marginal_tail(&cert()?, args.sigma, args.n_particles)?,
        Which::Tree => genealogical_tail(&cert()?, args.sigma, args.n_particles, n)?,
        Which::FreeEnergy => free_energy_tail(&cert()?, args.sigma, args.n_particles)?,
        Which::Backward => {
            let tau = file.density_ratio.context("the analyzed model has no finite density ratio")?;
            backward_tail(&cert()?, tau, args.sigma, args.n_particles, n)?
        }
    })
}

pub fn bounds(args: &BoundsArgs) -> Result<()> {
    let file: AnalysisFile = serde_json::from_str(&std::fs::read_to_string(&args.cert)?).with_context(|| format!("parsing {}", args.cert.display()))?;
    let grid = parse_grid(&args.x_grid)?;
    let curve = curve(&file, args)?;
    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record(["x", "bound", "prob_floor"])?;
    for x in grid {
        w.write_record([x.to_string(), curve.bound(x).to_string(), TailCurve::prob_floor(x).to_string()])?;
    }
    w.flush()?;
    Ok(())
}
