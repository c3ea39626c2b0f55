//! Ensemble runs, bound-coverage estimation and convergence sweeps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backward::{AdditiveFunctional, TrajectoryStore};
use crate::bounds::{backward_tail, free_energy_tail, genealogical_tail, marginal_tail, uniform_marginal_tail, TailCurve};
use crate::error::{Error, Result};
use crate::fk::{load_model, FeynmanKac, FiniteModel};
use crate::particle::{run, EngineConfig};
use crate::semigroup::{certify_hm, density_ratio, ContractionProfile};
use crate::zoo;

/// Environment variable capping the replicate pool size.
pub const THREADS_ENV: &str = "FKPM_THREADS";

/// A zoo fixture name or a model JSON file (relative to the config file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRef {
    Zoo(String),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// `eta_n^N(f)` against `eta_n(f)`.
    Marginal,
    /// Genealogical tree occupation measure of `(n+1)^{-1} sum_p f(x_p)` against `Q_n`.
    Tree,
    /// `(1/n) log(Z_n^N / Z_n)`.
    FreeEnergy,
    /// Backward smoother `Q_n^N` of `(n+1)^{-1} sum_p f(x_p)` against `Q_n`.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Marginal,
    Uniform,
    Genealogical,
    FreeEnergy,
    Backward,
}

impl BoundKind {
    fn fits(self, estimator: Estimator) -> bool {
        matches!(
            (self, estimator),
            (BoundKind::Marginal | BoundKind::Uniform, Estimator::Marginal)
                | (BoundKind::Genealogical, Estimator::Tree)
                | (BoundKind::FreeEnergy, Estimator::FreeEnergy)
                | (BoundKind::Backward, Estimator::Backward)
        )
    }
}

fn default_m() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_epsilon() -> f64 {
    1.0
}

/// Which tail curve to test, at which confidence levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub which: BoundKind,
    pub x_grid: Vec<f64>,
    /// Window of the H_m certificate.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Whether a failed verdict fails the experiment.
    #[serde(default = "default_true")]
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelRef,
    pub estimator: Estimator,
    #[serde(default)]
    pub functionals: Vec<String>,
    pub n_particles: Vec<usize>,
    #[serde(default)]
    pub horizon: Option<usize>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub bound: Option<BoundSpec>,
}

impl ExperimentConfig {
    /// Read a JSON config; `file` model paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let ModelRef::File(f) = &mut cfg.model {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    *f = dir.join(&*f);
                }
            }
        }
        Ok(cfg)
    }

    pub fn resolve_model(&self) -> Result<FiniteModel> {
        match &self.model {
            ModelRef::Zoo(name) => Ok(zoo::fixture(name)?.model),
            ModelRef::File(path) => load_model(path),
        }
    }

    pub fn validate(&self, model: &FiniteModel) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.n_particles.is_empty() || self.n_particles.contains(&0) {
            return Err(Error::InvalidArgument("particle counts must be a nonempty list of positive numbers".into()));
        }
        let horizon = self.horizon_for(model);
        if horizon > model.horizon() {
            return Err(Error::InvalidArgument(format!("horizon {horizon} exceeds model horizon {}", model.horizon())));
        }
        if self.estimator == Estimator::FreeEnergy && horizon == 0 {
            return Err(Error::InvalidArgument("free-energy deviations need horizon >= 1".into()));
        }
        if self.estimator != Estimator::FreeEnergy && self.functionals.is_empty() {
            return Err(Error::InvalidArgument("this estimator needs at least one functional".into()));
        }
        for name in &self.functionals {
            let f = model.functional(name).ok_or_else(|| Error::InvalidArgument(format!("model has no functional {name:?}")))?;
            if self.bound.is_some() && oscillation(f) > 1.0 {
                return Err(Error::InvalidArgument(format!("functional {name:?} has oscillation {} > 1", oscillation(f))));
            }
        }
        if let Some(b) = &self.bound {
            if !b.which.fits(self.estimator) {
                return Err(Error::InvalidArgument(format!("bound {:?} does not apply to estimator {:?}", b.which, self.estimator)));
            }
            if b.x_grid.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::InvalidArgument("x grid must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }

    fn horizon_for(&self, model: &FiniteModel) -> usize {
        self.horizon.unwrap_or(model.horizon())
    }
}

fn oscillation(f: &[f64]) -> f64 {
    f.iter().copied().fold(f64::NEG_INFINITY, f64::max) - f.iter().copied().fold(f64::INFINITY, f64::min)
}

/// One estimate from one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub n_particles: usize,
    pub replicate: usize,
    pub seed: u64,
    pub target: String,
    pub estimate: f64,
    pub reference: f64,
    /// The signed quantity the tail bound controls.
    pub deviation: f64,
}

/// Targets of an experiment: `(name, reference value)`.
fn references(cfg: &ExperimentConfig, model: &FiniteModel, horizon: usize) -> Result<Vec<(String, f64)>> {
    match cfg.estimator {
        Estimator::FreeEnergy => {
            let log_z = model.unnormalized_flow_exact(horizon)?.log_z;
            Ok(vec![("log_Z".into(), log_z)])
        }
        Estimator::Marginal => {
            let eta = model.flow_exact(horizon)?.pop().expect("flow has n + 1 entries");
            Ok(cfg.functionals.iter().map(|f| (f.clone(), eta.integrate(model.functional(f).expect("validated")))).collect())
        }
        Estimator::Tree | Estimator::Backward => cfg
            .functionals
            .iter()
            .map(|f| {
                let values = model.functional(f).expect("validated").to_vec();
                Ok((f.clone(), model.additive_expectation_exact(&vec![values; horizon + 1])?))
            })
            .collect(),
    }
}

fn replicate(cfg: &ExperimentConfig, model: &FiniteModel, horizon: usize, n_particles: usize, r: usize, refs: &[(String, f64)]) -> Result<Vec<RunRow>> {
    let seed = cfg.seed.wrapping_add(r as u64);
    let retain = matches!(cfg.estimator, Estimator::Tree | Estimator::Backward);
    let config = EngineConfig::new(n_particles).epsilon(cfg.epsilon).retain_genealogy(retain);
    let out = run(model, &config, horizon, seed, |_| Vec::new())?;
    let estimates: Vec<f64> = match cfg.estimator {
        Estimator::FreeEnergy => vec![out.population.log_free_energy],
        Estimator::Marginal => cfg.functionals.iter().map(|f| {
            let v = model.functional(f).expect("validated");
            out.population.mean(|x| v[*x])
        }).collect(),
        Estimator::Tree => {
            let lines = out.genealogy.ancestral_lines()?;
            cfg.functionals
                .iter()
                .map(|f| {
                    let v = model.functional(f).expect("validated");
                    lines.iter().map(|l| l.iter().map(|x| v[*x]).sum::<f64>() / (horizon + 1) as f64).sum::<f64>() / lines.len() as f64
                })
                .collect()
        }
        Estimator::Backward => {
            let store = TrajectoryStore::from_run(model, &out)?;
            cfg.functionals
                .iter()
                .map(|f| {
                    let v = model.functional(f).expect("validated");
                    store.smoothed_additive(&AdditiveFunctional::stationary(|x: &usize| v[*x], true))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(refs
        .iter()
        .zip(estimates)
        .map(|((target, reference), estimate)| {
            let deviation = match cfg.estimator {
                Estimator::FreeEnergy => (estimate - reference) / horizon as f64,
                _ => estimate - reference,
            };
            RunRow { n_particles, replicate: r, seed, target: target.clone(), estimate, reference: *reference, deviation }
        })
        .collect())
}

/// `R` independent runs per particle count, with seeds `seed + r`; rows are ordered by
/// `(N, r, target)` whatever the pool size.
pub fn run_ensemble(cfg: &ExperimentConfig, model: &FiniteModel) -> Result<Vec<RunRow>> {
    cfg.validate(model)?;
    let horizon = cfg.horizon_for(model);
    let refs = references(cfg, model, horizon)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_particles {
        let per_rep = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| replicate(cfg, model, horizon, n, r, &refs))
            .collect::<Result<Vec<_>>>()?;
        rows.extend(per_rep.into_iter().flatten());
    }
    Ok(rows)
}

/// One grid point of a coverage test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub target: String,
    pub n_particles: usize,
    /// `+1` tests `deviation > bound`, `-1` tests `-deviation > bound`.
    pub sign: i32,
    pub x: f64,
    pub bound: f64,
    pub violations: usize,
    pub replicates: usize,
    pub frequency: f64,
    pub floor: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Verdict of a bound-coverage test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub curve: String,
    pub rows: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// `freq <= e^{-x} + 3 sqrt(e^{-x} (1 - e^{-x}) / R)`.
pub fn coverage_verdict(frequency: f64, x: f64, replicates: usize) -> (f64, f64, bool) {
    let floor = (-x).exp();
    let slack = 3.0 * (floor * (1.0 - floor) / replicates as f64).sqrt();
    (floor, slack, frequency <= floor + slack)
}

/// Count `sign * deviation > bound(x)` at each grid point.
pub fn coverage_test(target: &str, n_particles: usize, deviations: &[f64], curve: &TailCurve, x_grid: &[f64], sign: i32) -> CoverageReport {
    let rows = x_grid
        .iter()
        .map(|&x| {
            let bound = curve.bound(x);
            let violations = deviations.iter().filter(|d| sign as f64 * **d > bound).count();
            let frequency = violations as f64 / deviations.len() as f64;
            let (floor, slack, pass) = coverage_verdict(frequency, x, deviations.len());
            CoverageRow { target: target.into(), n_particles, sign, x, bound, violations, replicates: deviations.len(), frequency, floor, slack, pass }
        })
        .collect();
    CoverageReport { curve: curve.name().into(), rows }
}

/// Tail curve matching the experiment's bound selection.
pub fn build_curve(spec: &BoundSpec, model: &FiniteModel, n_particles: usize, horizon: usize) -> Result<TailCurve> {
    let cert = || certify_hm(model, spec.m);
    match spec.which {
        BoundKind::Marginal => {
            let profile = ContractionProfile::compute(model, horizon)?;
            let sigma = spec.sigma.map(|s| vec![s; horizon + 1]);
            marginal_tail(&profile, sigma.as_deref(), n_particles, horizon, None)
        }
        BoundKind::Uniform => uniform_marginal_tail(&cert()?, spec.sigma, n_particles),
        BoundKind::Genealogical => genealogical_tail(&cert()?, spec.sigma, n_particles, horizon),
        BoundKind::FreeEnergy => free_energy_tail(&cert()?, spec.sigma, n_particles),
        BoundKind::Backward => backward_tail(&cert()?, density_ratio(model)?, spec.sigma, n_particles, horizon),
    }
}

/// Log-log fit of RMSE against `N` for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub target: String,
    pub n_particles: Vec<usize>,
    pub rmse: Vec<f64>,
    /// `None` when fewer than two `N` values or some RMSE is zero.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

/// Least-squares `(slope, intercept)` of `log y` on `log x`; `None` if undefined.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 || xs.len() != ys.len() || ys.iter().any(|y| !(*y > 0.0 && y.is_finite())) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// RMSE of the deviations per `(target, N)` and the fitted log-log slope per target.
pub fn sweep(rows: &[RunRow]) -> Vec<SweepRow> {
    let mut targets: Vec<&str> = Vec::new();
    for r in rows {
        if !targets.contains(&r.target.as_str()) {
            targets.push(&r.target);
        }
    }
    targets
        .into_iter()
        .map(|t| {
            let mut ns: Vec<usize> = rows.iter().filter(|r| r.target == t).map(|r| r.n_particles).collect();
            ns.dedup();
            let rmse: Vec<f64> = ns
                .iter()
                .map(|n| {
                    let d: Vec<f64> = rows.iter().filter(|r| r.target == t && r.n_particles == *n).map(|r| r.deviation).collect();
                    (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt()
                })
                .collect();
            let xs: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
            let fit = loglog_fit(&xs, &rmse);
            SweepRow { target: t.into(), n_particles: ns, rmse, slope: fit.map(|f| f.0), intercept: fit.map(|f| f.1) }
        })
        .collect()
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<RunRow>,
    pub coverage: Vec<CoverageReport>,
    pub sweep: Vec<SweepRow>,
    /// False iff a required coverage verdict failed.
    pub passed: bool,
}

/// Run the ensemble, the coverage tests (if a bound is configured) and the sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let model = cfg.resolve_model()?;
    let rows = run_ensemble(cfg, &model)?;
    let horizon = cfg.horizon_for(&model);
    let mut coverage = Vec::new();
    let mut passed = true;
    if let Some(spec) = &cfg.bound {
        let signs: &[i32] = if cfg.estimator == Estimator::FreeEnergy { &[1, -1] } else { &[1] };
        let (targets, _): (Vec<String>, Vec<f64>) = references(cfg, &model, horizon)?.into_iter().unzip();
        for &n in &cfg.n_particles {
            let curve = build_curve(spec, &model, n, horizon)?;
            for t in &targets {
                let d: Vec<f64> = rows.iter().filter(|r| r.n_particles == n && &r.target == t).map(|r| r.deviation).collect();
                for &s in signs {
                    let report = coverage_test(t, n, &d, &curve, &spec.x_grid, s);
                    if spec.required && !report.passed() {
                        passed = false;
                    }
                    coverage.push(report);
                }
            }
        }
    }
    Ok(ExperimentOutcome { sweep: sweep(&rows), rows, coverage, passed })
}

/// Run inside a pool capped by `FKPM_THREADS` when set.
pub fn run_experiment_pooled(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

/// Write `runs.csv`, `coverage.csv` and `report.txt` into `dir`.
pub fn write_outputs(dir: impl AsRef<Path>, cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut runs = csv::Writer::from_path(dir.join("runs.csv"))?;
    for r in &outcome.rows {
        runs.serialize(r)?;
    }
    runs.flush()?;
    let mut cov = csv::Writer::from_path(dir.join("coverage.csv"))?;
    cov.write_record(["curve", "target", "n_particles", "sign", "x", "bound", "violations", "replicates", "frequency", "floor", "slack", "verdict"])?;
    for rep in &outcome.coverage {
        for r in &rep.rows {
            cov.write_record([
                rep.curve.clone(),
                r.target.clone(),
                r.n_particles.to_string(),
                r.sign.to_string(),
                r.x.to_string(),
                r.bound.to_string(),
                r.violations.to_string(),
                r.replicates.to_string(),
                r.frequency.to_string(),
                r.floor.to_string(),
                r.slack.to_string(),
                if r.pass { "PASS" } else { "FAIL" }.to_string(),
            ])?;
        }
    }
    cov.flush()?;
    std::fs::write(dir.join("report.txt"), report_text(cfg, outcome))?;
    Ok(())
}

pub fn report_text(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> String {
    let mut s = String::new();
    let model = match &cfg.model {
        ModelRef::Zoo(name) => format!("zoo:{name}"),
        ModelRef::File(p) => format!("file:{}", p.display()),
    };
    let _ = writeln!(s, "model: {model}");
    let _ = writeln!(s, "estimator: {:?}", cfg.estimator);
    let _ = writeln!(s, "replicates: {}  seed: {}  N: {:?}", cfg.replicates, cfg.seed, cfg.n_particles);
    let _ = writeln!(s, "reference: exact oracle");
    let _ = writeln!(s);
    for row in &outcome.sweep {
        match (row.slope, row.intercept) {
            (Some(a), Some(b)) => {
                let _ = writeln!(s, "sweep {}: slope {a:.4} intercept {b:.4}", row.target);
            }
            _ => {
                let _ = writeln!(s, "sweep {}: slope undefined (rmse {:?})", row.target, row.rmse);
            }
        }
    }
    for rep in &outcome.coverage {
        for r in &rep.rows {
            let _ = writeln!(
                s,
                "coverage {} {} N={} sign={:+} x={}: {}/{} = {:.5} vs {:.5} + {:.5} {}",
                rep.curve,
                r.target,
                r.n_particles,
                r.sign,
                r.x,
                r.violations,
                r.replicates,
                r.frequency,
                r.floor,
                r.slack,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "verdict: {}", if outcome.passed { "PASS" } else { "FAIL" });
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(estimator: Estimator, functionals: &[&str]) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelRef::Zoo("hmm4".into()),
            estimator,
            functionals: functionals.iter().map(|s| s.to_string()).collect(),
            n_particles: vec![32, 128],
            horizon: Some(4),
            replicates: 40,
            seed: 11,
            epsilon: 1.0,
            bound: None,
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let text = r#"{"model": {"zoo": "hmm4"}, "estimator": "free_energy", "n_particles": [64], "replicates": 5, "seed": 3,
                       "bound": {"which": "free_energy", "x_grid": [1, 2, 3]}}"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.epsilon, 1.0);
        let b = cfg.bound.as_ref().unwrap();
        assert!(b.required && b.m == 1 && b.sigma.is_none());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation() {
        let model = zoo::hmm4().unwrap().model;
        let mut cfg = config(Estimator::Marginal, &["state"]);
        cfg.validate(&model).unwrap();
        cfg.bound = Some(BoundSpec { which: BoundKind::Uniform, x_grid: vec![1.0], m: 1, sigma: None, required: true });
        assert!(cfg.validate(&model).is_err(), "state has oscillation 3");
        cfg.functionals = vec!["in_0".into()];
        cfg.validate(&model).unwrap();
        cfg.bound.as_mut().unwrap().which = BoundKind::Backward;
        assert!(cfg.validate(&model).is_err());
        let mut cfg = config(Estimator::Marginal, &["in_0"]);
        cfg.replicates = 0;
        assert!(cfg.validate(&model).is_err());
        cfg.replicates = 1;
        cfg.n_particles = vec![0];
        assert!(cfg.validate(&model).is_err());
    }

    #[test]
    fn ensemble_is_deterministic_and_ordered() {
        let model = zoo::hmm4().unwrap().model;
        let cfg = config(Estimator::Marginal, &["in_0", "state"]);
        let a = run_ensemble(&cfg, &model).unwrap();
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_ensemble(&cfg, &model)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 40 * 2);
        assert_eq!((a[0].replicate, a[0].target.as_str(), a[1].target.as_str()), (0, "in_0", "state"));
        assert_eq!(a[2].seed, 12);
    }

    #[test]
    fn single_replicate_matches_a_direct_run() {
        let model = zoo::hmm4().unwrap().model;
        let mut cfg = config(Estimator::FreeEnergy, &[]);
        cfg.replicates = 1;
        cfg.n_particles = vec![50];
        let rows = run_ensemble(&cfg, &model).unwrap();
        let direct = run(&model, &EngineConfig::new(50), 4, 11, |_| Vec::new()).unwrap();
        assert_eq!(rows[0].estimate, direct.population.log_free_energy);
    }

    #[test]
    fn every_estimator_tracks_its_oracle() {
        let model = zoo::hmm4().unwrap().model;
        for est in [Estimator::Marginal, Estimator::Tree, Estimator::Backward, Estimator::FreeEnergy] {
            let mut cfg = config(est, &["in_0"]);
            cfg.n_particles = vec![400];
            cfg.replicates = 20;
            let rows = run_ensemble(&cfg, &model).unwrap();
            let rmse = (rows.iter().map(|r| r.deviation * r.deviation).sum::<f64>() / rows.len() as f64).sqrt();
            assert!(rmse < 0.1, "{est:?}: rmse {rmse}");
        }
    }

    #[test]
    fn coverage_edge_cases() {
        let devs = [0.3, -0.1, 0.2, -0.5];
        let inf = TailCurve::new("inf", |_| f64::INFINITY, Vec::new());
        let rep = coverage_test("f", 10, &devs, &inf, &[1.0, 2.0], 1);
        assert!(rep.passed() && rep.rows.iter().all(|r| r.violations == 0));
        let zero = TailCurve::new("zero", |_| 0.0, Vec::new());
        let rep = coverage_test("f", 10, &devs, &zero, &[1.0], 1);
        assert_eq!(rep.rows[0].frequency, 0.5);
        let rep = coverage_test("f", 10, &devs, &zero, &[1.0], -1);
        assert_eq!(rep.rows[0].frequency, 0.5);
        let (floor, slack, pass) = coverage_verdict(0.4, 1.0, 100);
        assert!((floor - (-1f64).exp()).abs() < 1e-15);
        assert!((slack - 3.0 * (floor * (1.0 - floor) / 100.0).sqrt()).abs() < 1e-15);
        assert!(pass);
        assert!(!coverage_verdict(0.6, 1.0, 100).2);
    }

    #[test]
    fn loglog_fit_cases() {
        let xs = [10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        let (a, b) = loglog_fit(&xs, &ys).unwrap();
        assert!((a + 0.5).abs() < 1e-12 && (b - 3f64.ln()).abs() < 1e-12);
        assert!(loglog_fit(&xs, &[0.0, 0.0, 0.0]).is_none());
        assert!(loglog_fit(&xs[..1], &ys[..1]).is_none());
    }

    #[test]
    fn deterministic_model_has_undefined_slope() {
        let mut cfg = config(Estimator::Marginal, &["state"]);
        cfg.model = ModelRef::Zoo("subset_restriction_hard".into());
        cfg.horizon = Some(0);
        let model = cfg.resolve_model().unwrap();
        // eta_0 is uniform on 8 states, so use a constant functional.
        let model = model.with_functional("one", vec![1.0; 8]).unwrap();
        cfg.functionals = vec!["one".into()];
        let rows = run_ensemble(&cfg, &model).unwrap();
        let sw = sweep(&rows);
        assert!(sw[0].rmse.iter().all(|r| *r == 0.0) && sw[0].slope.is_none());
    }

    #[test]
    fn experiment_writes_outputs() {
        let mut cfg = config(Estimator::FreeEnergy, &[]);
        cfg.bound = Some(BoundSpec { which: BoundKind::FreeEnergy, x_grid: vec![1.0, 2.0], m: 1, sigma: None, required: true });
        let out = run_experiment(&cfg).unwrap();
        assert!(out.passed);
        assert_eq!(out.coverage.len(), 2 * 2);
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &cfg, &out).unwrap();
        let runs = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
        assert!(runs.starts_with("n_particles,replicate,seed,target,estimate,reference,deviation"));
        let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(report.ends_with("verdict: PASS\n"));
        let again = run_experiment(&cfg).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        write_outputs(dir2.path(), &cfg, &again).unwrap();
        for f in ["runs.csv", "coverage.csv", "report.txt"] {
            assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(dir2.path().join(f)).unwrap());
        }
    }
}
