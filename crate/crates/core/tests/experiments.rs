use fkpm_core::experiments::{coverage_verdict, run_experiment, write_outputs, ExperimentConfig};
use proptest::prelude::*;

fn config(estimator: &str, which: &str) -> ExperimentConfig {
    serde_json::from_str(&format!(
        r#"{{"model": {{"zoo": "hmm4"}}, "estimator": "{estimator}", "functionals": ["in_0"], "n_particles": [16, 64],
            "horizon": 5, "replicates": 60, "seed": 3, "bound": {{"which": "{which}", "x_grid": [0.5, 1.0, 2.0]}}}}"#
    ))
    .unwrap()
}

fn outputs(cfg: &ExperimentConfig, threads: usize) -> Vec<Vec<u8>> {
    let outcome = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_experiment(cfg).unwrap());
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), cfg, &outcome).unwrap();
    ["runs.csv", "coverage.csv", "report.txt"].iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect()
}

#[test]
fn outputs_are_byte_stable() {
    for (estimator, which) in [("marginal", "marginal"), ("tree", "genealogical"), ("free_energy", "free_energy"), ("backward", "backward")] {
        let cfg = config(estimator, which);
        let first = outputs(&cfg, 1);
        assert_eq!(first, outputs(&cfg, 1), "{estimator}: repeat differs");
        assert_eq!(first, outputs(&cfg, 8), "{estimator}: thread count changes output");
    }
}

#[test]
fn coverage_table_rechecks() {
    let cfg = config("free_energy", "free_energy");
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&cfg).unwrap();
    write_outputs(dir.path(), &cfg, &outcome).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("coverage.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"));
    let mut all_pass = true;
    let mut rows = 0;
    for record in reader.records() {
        let r = record.unwrap();
        let get = |name: &str| r[col(name)].parse::<f64>().unwrap();
        let (violations, replicates, x) = (get("violations"), get("replicates"), get("x"));
        let frequency = violations / replicates;
        assert!((0.0..=1.0).contains(&frequency));
        assert_eq!(frequency, get("frequency"));
        let floor = (-x).exp();
        let threshold = floor + 3.0 * (floor * (1.0 - floor) / replicates).sqrt();
        let pass = frequency <= threshold;
        assert_eq!(r[col("verdict")].to_string(), if pass { "PASS" } else { "FAIL" });
        all_pass &= pass;
        rows += 1;
    }
    // Two signs, two N values, three x values.
    assert_eq!(rows, 12);
    assert_eq!(all_pass, outcome.passed);
}

#[test]
fn runs_table_has_one_row_per_replicate() {
    let cfg = config("marginal", "marginal");
    let outcome = run_experiment(&cfg).unwrap();
    assert_eq!(outcome.rows.len(), 2 * 60);
    for (i, row) in outcome.rows.iter().enumerate() {
        assert_eq!(row.replicate, i % 60);
        assert_eq!(row.seed, 3 + (i % 60) as u64);
        assert!((row.deviation - (row.estimate - row.reference)).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn verdict_formula(violations in 0usize..=500, replicates in 500usize..2000, x in 0.0f64..5.0) {
        let freq = violations as f64 / replicates as f64;
        let (floor, slack, pass) = coverage_verdict(freq, x, replicates);
        prop_assert_eq!(floor, (-x).exp());
        prop_assert!((slack - 3.0 * (floor * (1.0 - floor) / replicates as f64).sqrt()).abs() < 1e-15);
        prop_assert_eq!(pass, freq <= floor + slack);
    }
}
