mod common;

use fkpm_core::fk::{total_variation, FeynmanKac, FiniteModel};
use fkpm_core::particle::{run, EngineConfig};
use fkpm_core::semigroup::{dobrushin, MixingCertificate};
use fkpm_core::zoo::{catalog, clock, count_self_avoiding, doob5, fit_tv_decay, fixture, hmm4, linear_gaussian, saw, Oracle, ZooModel};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

fn reference<M>(zoo: &ZooModel<M>, name: &str) -> f64 {
    zoo.reference(name).unwrap_or_else(|| panic!("{} has no reference {name}", zoo.name))
}

#[test]
fn finite_references_match_the_linear_recursion() {
    for entry in catalog().iter().filter(|e| e.emittable) {
        let zoo = fixture(entry.name).unwrap();
        let model = &zoo.model;
        for n in 0..=model.horizon() {
            let gamma = model.gamma_recursion(n).unwrap();
            let z = reference(&zoo, &format!("log_Z_{n}"));
            assert!((gamma.mass().ln() - z).abs() < 1e-10, "{} log_Z_{n}", entry.name);
            let eta = gamma.normalized().unwrap();
            for (name, f) in model.functionals() {
                let v = reference(&zoo, &format!("eta_{n}({name})"));
                assert!((eta.integrate(f) - v).abs() < 1e-10, "{} eta_{n}({name})", entry.name);
            }
        }
        assert!(zoo.references.iter().all(|r| r.value.is_finite()), "{}", entry.name);
    }
}

#[test]
fn hmm_likelihood_by_forward_algorithm() {
    let zoo = hmm4().unwrap();
    let kernel = [[0.7, 0.1, 0.1, 0.1], [0.1, 0.6, 0.2, 0.1], [0.1, 0.2, 0.5, 0.2], [0.2, 0.1, 0.1, 0.6]];
    let emission = [[0.7, 0.2, 0.1], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6], [0.3, 0.3, 0.4]];
    let obs = [0, 1, 2, 2, 1, 0, 0, 2, 1, 1, 0];
    // alpha_t(x) = p(y_0..y_{t-1}, X_t = x); the reference excludes the last observation.
    let mut alpha = vec![0.25; 4];
    for &y in &obs[..obs.len() - 1] {
        let weighted: Vec<f64> = (0..4).map(|x| alpha[x] * emission[x][y]).collect();
        alpha = (0..4).map(|z| (0..4).map(|x| weighted[x] * kernel[x][z]).sum()).collect();
    }
    let expected = alpha.iter().sum::<f64>().ln();
    assert!((reference(&zoo, "log_likelihood") - expected).abs() < 1e-12);
    assert_eq!(zoo.oracle, Oracle::ExactFlow);
}

#[test]
fn hard_restriction_free_energy_is_set_mass() {
    let zoo = fixture("subset_restriction_hard").unwrap();
    for (n, size) in [8.0, 6.0, 4.0, 3.0].iter().enumerate() {
        assert!((reference(&zoo, &format!("lambda(A_{n})")) - size / 8.0).abs() < 1e-15);
        assert!((reference(&zoo, &format!("log_Z_{n}")) - (size / 8.0f64).ln()).abs() < 1e-12);
    }
}

#[test]
fn annealing_tracks_boltzmann_laws() {
    let zoo = fixture("simulated_annealing").unwrap();
    let v: [f64; 8] = [0.0, 1.0, 2.5, 1.2, 0.4, 1.8, 3.0, 1.5];
    let betas: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];
    let partition = |b: f64| v.iter().map(|e| (-b * e).exp()).sum::<f64>();
    for (n, b) in betas.iter().enumerate() {
        let mean = v.iter().map(|e| e * (-b * e).exp()).sum::<f64>() / partition(*b);
        assert!((reference(&zoo, &format!("mu_{n}(V)")) - mean).abs() < 1e-12);
        assert!((reference(&zoo, &format!("eta_{n}(V)")) - mean).abs() < 1e-10);
        let ratio = (partition(*b) / partition(0.0)).ln();
        assert!((reference(&zoo, &format!("log_partition_ratio_{n}")) - ratio).abs() < 1e-12);
        assert!((reference(&zoo, &format!("log_Z_{n}")) + zoo.log_rescale[n] - ratio).abs() < 1e-10);
    }
}

#[test]
fn doob_ground_state() {
    let (zoo, doob) = doob5().unwrap();
    let model = &zoo.model;
    let m = model.kernel(1).clone();
    let g = model.potential_vec(0).to_vec();
    // Independent eigenvalue: symmetrize diag(G) M with the reversible measure.
    let mut pi = vec![1.0];
    for x in 0..4 {
        pi.push(pi[x] * m[(x, x + 1)] / m[(x + 1, x)]);
    }
    let sym = DMatrix::from_fn(5, 5, |x, y| g[x].sqrt() * pi[x].sqrt() * m[(x, y)] / pi[y].sqrt() * g[y].sqrt());
    let sym_q = sym.clone();
    let top = SymmetricEigen::new(sym).eigenvalues.max();
    assert!((doob.lambda - top).abs() < 1e-12);
    assert!((reference(&zoo, "lambda") - top).abs() < 1e-12);

    let q = DMatrix::from_fn(5, 5, |x, y| g[x] * m[(x, y)]);
    let h = DVector::from_vec(doob.h.clone());
    assert!(((&q * &h) - doob.lambda * &h).amax() < 1e-10);
    assert!(doob.h.iter().all(|v| *v > 0.0));
    for r in 0..5 {
        assert!((doob.doob_kernel.row(r).sum() - 1.0).abs() < 1e-12);
    }
    // Free energy through the h-process against the exact flow.
    for n in [1, 5, 20, 60] {
        let exact = model.unnormalized_flow_exact(n).unwrap().log_z;
        assert!((doob.free_energy(model.eta0(), n).unwrap().ln() - exact).abs() < 1e-9, "n = {n}");
    }
    // eta_n approaches eta_inf monotonically once the initial transient is over.
    let flow = model.flow_exact(60).unwrap();
    let d: Vec<f64> = flow.iter().map(|eta| total_variation(eta, &doob.eta_inf).unwrap()).collect();
    assert!(d[10..].windows(2).all(|w| w[1] <= w[0] + 1e-15), "{d:?}");
    let decay = fit_tv_decay(model, &doob.eta_inf, 60).unwrap();
    assert!(decay.delta > 0.0 && decay.holds());
    // The asymptotic rate is the spectral gap log(lambda_1 / lambda_2).
    let mut spectrum: Vec<f64> = SymmetricEigen::new(sym_q).eigenvalues.iter().copied().collect();
    spectrum.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let gap = (spectrum[0] / spectrum[1].abs()).ln();
    assert!((decay.delta - gap).abs() < 0.1 * gap, "fitted {} vs gap {gap}", decay.delta);
}

#[test]
fn clock_certificate() {
    let (zoo, cert) = clock().unwrap();
    let mut k = DMatrix::from_element(5, 5, 0.02);
    for x in 0..5 {
        k[(x, (x + 1) % 5)] += 0.9;
    }
    let alpha = 8.0 * (1.0 - dobrushin(&k)) - 0.5;
    assert!((reference(&zoo, "alpha") - alpha).abs() < 1e-12);
    let MixingCertificate::H0 { rho, g } = cert else { panic!("clock certifies H_0") };
    assert!((rho - (-alpha * 0.1f64).exp()).abs() < 1e-12);
    assert!((g - (0.1f64 * 0.5).exp()).abs() < 1e-12);
    // The certified rho dominates every one-step product g_n beta(M_{n+1}).
    for n in 0..zoo.model.horizon() {
        let gv = zoo.model.potential_vec(n);
        let ratio = gv.iter().copied().fold(0.0, f64::max) / gv.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(ratio * dobrushin(zoo.model.kernel(n + 1)) <= rho + 1e-12);
    }
}

/// Predictor of `X_n` given `y_0..y_{n-1}` and `log p(y_0..y_{n-1})` by conditioning the joint Gaussian.
fn joint_gaussian(a: f64, c: f64, q: f64, r: f64, m0: f64, p0: f64, y: &[f64], n: usize) -> (f64, f64, f64) {
    let var = |s: usize| a.powi(2 * s as i32) * p0 + q * (0..s).map(|j| a.powi(2 * j as i32)).sum::<f64>();
    let cov = |s: usize, t: usize| {
        let (lo, hi) = (s.min(t), s.max(t));
        a.powi((hi - lo) as i32) * var(lo)
    };
    let mean = |t: usize| a.powi(t as i32) * m0;
    if n == 0 {
        return (m0, p0, 0.0);
    }
    let syy = DMatrix::from_fn(n, n, |s, t| c * c * cov(s, t) + if s == t { r } else { 0.0 });
    let sxy = DVector::from_fn(n, |t, _| c * cov(n, t));
    let resid = DVector::from_fn(n, |t, _| y[t] - c * mean(t));
    let chol = syy.clone().cholesky().unwrap();
    let solved = chol.solve(&resid);
    let k = chol.solve(&sxy);
    let pred_mean = mean(n) + sxy.dot(&solved);
    let pred_var = var(n) - sxy.dot(&k);
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let log_p = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + resid.dot(&solved));
    (pred_mean, pred_var, log_p)
}

#[test]
fn kalman_references_match_joint_conditioning() {
    let zoo = linear_gaussian().unwrap();
    let m = &zoo.model;
    for n in 0..=m.horizon() {
        let (mean, var, log_p) = joint_gaussian(m.a, m.c, m.q, m.r, m.m0, m.p0, &m.observations, n);
        assert!((reference(&zoo, &format!("pred_mean_{n}")) - mean).abs() < 1e-9, "mean {n}");
        assert!((reference(&zoo, &format!("pred_var_{n}")) - var).abs() < 1e-9, "var {n}");
        let rescaled = log_p - zoo.log_rescale[n];
        assert!((reference(&zoo, &format!("log_Z_{n}")) - rescaled).abs() < 1e-8, "log_Z {n}");
    }
}

#[test]
fn saw_counts_and_fractions() {
    // Number of n-step self-avoiding walks on Z^2.
    let known: [u64; 13] = [1, 4, 12, 36, 100, 284, 780, 2172, 5916, 16268, 44100, 120292, 324932];
    for (n, c) in known.iter().enumerate() {
        assert_eq!(count_self_avoiding(2, n), *c);
    }
    // Z^3: 1, 6, 30, 150, 726.
    assert_eq!((0..5).map(|n| count_self_avoiding(3, n)).collect::<Vec<_>>(), vec![1, 6, 30, 150, 726]);
    let zoo = saw().unwrap();
    assert_eq!(reference(&zoo, "saw_fraction_2"), 0.75);
    assert_eq!(reference(&zoo, "saw_count_5"), 284.0);
    assert_eq!(zoo.oracle, Oracle::Enumeration);
}

/// RMSE of `eta_n^N(f)` over replicates.
fn rmse(model: &FiniteModel, f: &[f64], target: f64, n_particles: usize, replicates: u64) -> f64 {
    let cfg = EngineConfig::new(n_particles);
    let se: f64 = (0..replicates)
        .into_par_iter()
        .map(|seed| {
            let out = run(model, &cfg, model.horizon(), seed, |_| Vec::new()).unwrap();
            (out.population.mean(|x| f[*x]) - target).powi(2)
        })
        .sum();
    (se / replicates as f64).sqrt()
}

#[test]
fn particle_estimates_converge_to_references() {
    for name in ["hmm4", "subset_restriction", "simulated_annealing", "geometric_clock"] {
        let zoo = fixture(name).unwrap();
        let (fname, f) = zoo.model.functionals().iter().next().map(|(k, v)| (k.clone(), v.clone())).unwrap();
        let n = zoo.model.horizon();
        let target = reference(&zoo, &format!("eta_{n}({fname})"));
        let coarse = rmse(&zoo.model, &f, target, 64, 400);
        let fine = rmse(&zoo.model, &f, target, 1024, 400);
        // Sixteen times the particles should cut the error by about four.
        let ratio = coarse / fine;
        assert!((2.5..6.5).contains(&ratio), "{name}: RMSE ratio {ratio}");
    }
}
