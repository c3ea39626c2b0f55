mod common;

use common::{max_abs_diff, probability, random_model, rng};
use fkpm_core::fk::{boltzmann_gibbs, model_to_json, parse_model, total_variation, transport, Measure, DEFAULT_PATH_CAP};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_energy_product_matches_linear_recursion(seed in any::<u64>(), k in 2usize..6, n in 0usize..9) {
        let model = random_model(seed, k, n, 0.05);
        let log_z = model.unnormalized_flow_exact(n).unwrap().log_z;
        let gamma = model.gamma_recursion(n).unwrap();
        prop_assert!((gamma.mass().ln() - log_z).abs() < 1e-10);
        // gamma_n normalizes to eta_n.
        let eta = model.flow_exact(n).unwrap().pop().unwrap();
        prop_assert!(max_abs_diff(gamma.normalized().unwrap().weights(), eta.weights()) < 1e-12);
    }

    #[test]
    fn flow_iterates_are_probabilities(seed in any::<u64>(), k in 2usize..6, n in 0usize..12) {
        let model = random_model(seed, k, n, 0.01);
        for eta in model.flow_exact(n).unwrap() {
            prop_assert!(eta.weights().iter().all(|w| *w >= 0.0));
            prop_assert!((eta.mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn path_marginals_match_flow(seed in any::<u64>(), k in 2usize..4, n in 0usize..5) {
        let model = random_model(seed, k, n, 0.05);
        let paths = model.path_measure_exact(n, DEFAULT_PATH_CAP).unwrap();
        let flow = model.flow_exact(n).unwrap();
        prop_assert!(max_abs_diff(paths.marginal(n).weights(), flow[n].weights()) < 1e-10);
        let smoothed = model.path_marginals_exact(n).unwrap();
        for p in 0..=n {
            prop_assert!(max_abs_diff(paths.marginal(p).weights(), smoothed[p].weights()) < 1e-10);
        }
    }

    #[test]
    fn boltzmann_gibbs_is_lipschitz(seed in any::<u64>(), k in 2usize..8) {
        let mut r = rng(seed);
        let mu = Measure::probability(probability(&mut r, k, 0.0)).unwrap();
        let nu = Measure::probability(probability(&mut r, k, 0.0)).unwrap();
        let g = common::potential(&mut r, k, 0.01);
        let sup = g.iter().copied().fold(0.0, f64::max);
        let lhs = total_variation(&boltzmann_gibbs(&mu, &g).unwrap(), &boltzmann_gibbs(&nu, &g).unwrap()).unwrap();
        let rhs = sup / mu.integrate(&g).max(nu.integrate(&g)) * total_variation(&mu, &nu).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn selection_transport_preserves_boltzmann_gibbs(seed in any::<u64>(), k in 2usize..8) {
        let mut r = rng(seed);
        let mu = Measure::probability(probability(&mut r, k, 0.0)).unwrap();
        let g = common::potential(&mut r, k, 0.01);
        let via_kernel = transport(&mu, &g).unwrap();
        prop_assert!(max_abs_diff(via_kernel.weights(), boltzmann_gibbs(&mu, &g).unwrap().weights()) < 1e-12);
    }

    #[test]
    fn json_round_trip_preserves_flow(seed in any::<u64>(), k in 2usize..5, n in 1usize..6) {
        let model = random_model(seed, k, n, 0.05);
        let back = parse_model(&model_to_json(&model).unwrap()).unwrap();
        let a = model.unnormalized_flow_exact(n).unwrap();
        let b = back.unnormalized_flow_exact(n).unwrap();
        prop_assert!((a.log_z - b.log_z).abs() < 1e-14);
        prop_assert!(max_abs_diff(a.eta.weights(), b.eta.weights()) < 1e-14);
    }
}

#[test]
fn total_variation_examples() {
    let a = Measure::probability(vec![0.7, 0.3]).unwrap();
    let b = Measure::probability(vec![0.4, 0.6]).unwrap();
    assert!((total_variation(&a, &b).unwrap() - 0.3).abs() < 1e-15);
    assert_eq!(total_variation(&Measure::dirac(3, 0), &Measure::dirac(3, 2)).unwrap(), 1.0);
    assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
}
