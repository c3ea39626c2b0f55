use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fk::{boltzmann_gibbs, FeynmanKac, FiniteModel, Measure, PathMeasure};

/// The path-space model `X_n = (X_0, .., X_n)` whose potential only reads the terminal
/// coordinate. Its time-`n` flow is the path measure `Q_n` of the base model.
#[derive(Debug, Clone, Copy)]
pub struct HistoricalModel<'a, M> {
    base: &'a M,
}

pub fn historical_lift<M: FeynmanKac>(base: &M) -> HistoricalModel<'_, M> {
    HistoricalModel { base }
}

impl<M: FeynmanKac> HistoricalModel<'_, M> {
    pub fn base(&self) -> &M {
        self.base
    }
}

impl<M: FeynmanKac> FeynmanKac for HistoricalModel<'_, M> {
    type State = Vec<M::State>;

    fn horizon(&self) -> usize {
        self.base.horizon()
    }

    fn sample_initial(&self, rng: &mut ChaCha8Rng) -> Self::State {
        vec![self.base.sample_initial(rng)]
    }

    fn sample_transition(&self, n: usize, x: &Self::State, rng: &mut ChaCha8Rng) -> Self::State {
        let mut path = Vec::with_capacity(x.len() + 1);
        path.extend_from_slice(x);
        path.push(self.base.sample_transition(n, x.last().expect("paths are never empty"), rng));
        path
    }

    fn potential(&self, n: usize, x: &Self::State) -> f64 {
        self.base.potential(n, x.last().expect("paths are never empty"))
    }

    fn allows_zero_potential(&self) -> bool {
        self.base.allows_zero_potential()
    }
}

/// Exact flow of the lifted model at time `n`: reweight the terminal coordinate by
/// `G_{p-1}`, then extend every path by `M_p`.
pub fn historical_flow_exact(model: &FiniteModel, n: usize, cap: u64) -> Result<PathMeasure> {
    let k = model.num_states();
    let total = (k as u128).checked_pow(n as u32 + 1).unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(Error::EnumerationCap { paths: total, cap });
    }
    let mut flow = model.eta0().clone();
    for p in 1..=n {
        let g = model.potential_vec(p - 1);
        let terminal: Vec<f64> = (0..flow.len()).map(|i| g[i % k]).collect();
        let psi = boltzmann_gibbs(&flow, &terminal)?;
        let m = model.kernel(p);
        let mut next = Vec::with_capacity(psi.len() * k);
        for (i, w) in psi.weights().iter().enumerate() {
            let x = i % k;
            next.extend((0..k).map(|y| w * m[(x, y)]));
        }
        flow = Measure::new(next)?;
    }
    Ok(PathMeasure::from_weights(k, n + 1, flow.into_weights()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fk::DEFAULT_PATH_CAP;
    use nalgebra::DMatrix;

    fn fixture() -> FiniteModel {
        let m = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.35, 0.65]);
        FiniteModel::new(
            Measure::probability(vec![0.6, 0.4]).unwrap(),
            vec![m.clone(), m.clone(), m],
            vec![vec![0.5, 1.0], vec![0.9, 0.2], vec![0.3, 0.7], vec![1.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn lifted_flow_equals_path_measure() {
        let model = fixture();
        for n in 0..=3 {
            let lifted = historical_flow_exact(&model, n, DEFAULT_PATH_CAP).unwrap();
            let direct = model.path_measure_exact(n, DEFAULT_PATH_CAP).unwrap();
            for (a, b) in lifted.weights().iter().zip(direct.weights()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lifted_sampler_grows_paths() {
        use rand::SeedableRng;
        let model = fixture();
        let lift = historical_lift(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x0 = lift.sample_initial(&mut rng);
        let x1 = lift.sample_transition(1, &x0, &mut rng);
        assert_eq!(x1.len(), 2);
        assert_eq!(x1[0], x0[0]);
        assert_eq!(lift.potential(1, &x1), model.potential_vec(1)[x1[1]]);
    }
}
