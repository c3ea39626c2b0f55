use nalgebra::DMatrix;

use super::{exact_references, Oracle, ZooModel};
use crate::error::{Error, Result};
use crate::fk::{FiniteModel, Measure};

/// Hidden Markov model with emission likelihoods `emission[(x, y)] = g(x, y)`.
///
/// `observations` holds `y_0..y_n`; the horizon is `n`. Each `G_p = g(., y_p) / c_p` with
/// `c_p = max_x g(x, y_p)`, so `p(y_0..y_{n-1}) = Z_n prod_{p<n} c_p`.
pub fn finite_hmm(eta0: Measure, kernel: DMatrix<f64>, emission: &DMatrix<f64>, observations: &[usize]) -> Result<ZooModel<FiniteModel>> {
    let k = eta0.len();
    if observations.is_empty() {
        return Err(Error::InvalidArgument("an HMM needs at least one observation".into()));
    }
    if emission.nrows() != k {
        return Err(Error::InvalidModel(format!("emission has {} rows for {k} states", emission.nrows())));
    }
    let mut potentials = Vec::with_capacity(observations.len());
    let mut log_rescale = vec![0.0];
    for (p, &y) in observations.iter().enumerate() {
        if y >= emission.ncols() {
            return Err(Error::InvalidArgument(format!("observation y_{p} = {y} outside {} symbols", emission.ncols())));
        }
        let g: Vec<f64> = emission.column(y).iter().copied().collect();
        if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidModel(format!("emission column {y} has a negative or non-finite entry")));
        }
        let c = g.iter().copied().fold(0.0, f64::max);
        if c <= 0.0 {
            return Err(Error::ZeroMass(c));
        }
        potentials.push(g.iter().map(|v| v / c).collect::<Vec<_>>());
        let last = *log_rescale.last().expect("nonempty");
        log_rescale.push(last + c.ln());
    }
    log_rescale.pop();
    let horizon = observations.len() - 1;
    let kernels = vec![kernel; horizon];
    let hard = potentials.iter().flatten().any(|v| *v == 0.0);
    let model = if hard {
        FiniteModel::with_hard_potentials(eta0, kernels, potentials)?
    } else {
        FiniteModel::new(eta0, kernels, potentials)?
    };
    let model = model.with_functional("state", (0..k).map(|i| i as f64).collect())?;
    let mut zoo = ZooModel { name: "finite_hmm".into(), model, oracle: Oracle::ExactFlow, references: Vec::new(), log_rescale };
    exact_references(&mut zoo)?;
    let log_z = zoo.reference(&format!("log_Z_{horizon}")).expect("exact references cover the horizon");
    zoo.push("log_likelihood", log_z + zoo.log_rescale[horizon], Oracle::ExactFlow);
    Ok(zoo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::FeynmanKac;

    fn chain() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.6, 0.3, 0.1, 0.2, 0.5, 0.3, 0.1, 0.2, 0.7])
    }

    #[test]
    fn uninformative_emissions_give_prior_chain() {
        let emission = DMatrix::from_element(3, 2, 0.4);
        let zoo = finite_hmm(Measure::dirac(3, 0), chain(), &emission, &[0, 1, 1, 0]).unwrap();
        let flow = zoo.model.flow_exact(3).unwrap();
        let m = chain();
        let mut prior = nalgebra::RowDVector::from_row_slice(&[1.0, 0.0, 0.0]);
        for eta in &flow {
            for (a, b) in eta.weights().iter().zip(prior.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
            prior = &prior * &m;
        }
        assert!((zoo.reference("log_likelihood").unwrap() - 3.0 * 0.4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_state_free_energy_is_product() {
        let emission = DMatrix::from_row_slice(1, 3, &[0.2, 0.5, 0.9]);
        let obs = [2, 0, 1, 1, 2];
        let zoo = finite_hmm(Measure::dirac(1, 0), DMatrix::from_element(1, 1, 1.0), &emission, &obs).unwrap();
        let want: f64 = obs[..4].iter().map(|&y| emission[(0, y)].ln()).sum();
        assert!((zoo.reference("log_likelihood").unwrap() - want).abs() < 1e-12);
        assert_eq!(zoo.model.horizon(), 4);
    }

    // Forward algorithm on the unscaled likelihoods.
    #[test]
    fn likelihood_matches_forward_algorithm() {
        let emission = DMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.5, 0.5, 0.05, 0.95]);
        let obs = [0, 1, 1, 0, 1, 0];
        let eta0 = Measure::probability(vec![0.5, 0.3, 0.2]).unwrap();
        let zoo = finite_hmm(eta0.clone(), chain(), &emission, &obs).unwrap();
        let m = chain();
        let mut alpha: Vec<f64> = eta0.weights().to_vec();
        let mut lik = 1.0;
        for &y in &obs[..obs.len() - 1] {
            let w: Vec<f64> = (0..3).map(|x| alpha[x] * emission[(x, y)]).collect();
            let s: f64 = w.iter().sum();
            lik *= s;
            alpha = (0..3).map(|j| (0..3).map(|i| w[i] / s * m[(i, j)]).sum()).collect();
        }
        assert!((zoo.reference("log_likelihood").unwrap() - lik.ln()).abs() < 1e-12);
        let n = obs.len() - 1;
        let mean: f64 = alpha.iter().enumerate().map(|(i, a)| i as f64 * a).sum();
        assert!((zoo.reference(&format!("eta_{n}(state)")).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let emission = DMatrix::from_element(3, 2, 0.0);
        assert!(matches!(finite_hmm(Measure::uniform(3), chain(), &emission, &[0]), Err(Error::ZeroMass(_))));
        let emission = DMatrix::from_element(3, 2, 0.5);
        assert!(finite_hmm(Measure::uniform(3), chain(), &emission, &[2]).is_err());
        assert!(finite_hmm(Measure::uniform(3), chain(), &emission, &[]).is_err());
    }
}
