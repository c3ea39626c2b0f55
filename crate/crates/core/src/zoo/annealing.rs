use nalgebra::DMatrix;

use super::{exact_references, Oracle, ZooModel};
use crate::error::{Error, Result};
use crate::fk::{FiniteModel, Measure};

fn check_symmetric(proposal: &DMatrix<f64>, k: usize) -> Result<()> {
    if proposal.nrows() != k || proposal.ncols() != k {
        return Err(Error::InvalidModel(format!("proposal is {}x{}, expected {k}x{k}", proposal.nrows(), proposal.ncols())));
    }
    for x in 0..k {
        for y in 0..x {
            if (proposal[(x, y)] - proposal[(y, x)]).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("proposal is not symmetric at ({x}, {y})")));
            }
        }
    }
    Ok(())
}

/// Metropolis kernel with symmetric proposal `K` targeting `exp(-beta V)`.
pub fn metropolis_kernel(v: &[f64], beta: f64, proposal: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = v.len();
    check_symmetric(proposal, k)?;
    let mut m = DMatrix::zeros(k, k);
    for x in 0..k {
        let mut stay = 1.0;
        for y in (0..k).filter(|&y| y != x) {
            let p = proposal[(x, y)] * (-beta * (v[y] - v[x])).exp().min(1.0);
            m[(x, y)] = p;
            stay -= p;
        }
        m[(x, x)] = stay.max(0.0);
    }
    Ok(m)
}

/// Boltzmann-Gibbs measure `exp(-beta V) / sum exp(-beta V)` on the states.
pub fn boltzmann_marginal(v: &[f64], beta: f64) -> Measure {
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = v.iter().map(|x| (-beta * (x - vmin)).exp()).collect();
    let s: f64 = w.iter().sum();
    Measure::probability(w.iter().map(|x| x / s).collect()).expect("Boltzmann weights are a probability vector")
}

/// `epsilon = sum_y min_x K^k(x, y)`, the largest constant with `K^k(x, .) >= epsilon nu`.
pub fn doeblin_constant(kernel: &DMatrix<f64>, k: usize) -> f64 {
    let power = kernel.pow(k as u32);
    (0..kernel.nrows()).map(|y| power.column(y).min()).sum()
}

/// Interacting annealing model: `eta_0 = mu_{beta_0}`, `M_n` the `iterates[n-1]`-fold Metropolis
/// kernel at `beta_n`, `G_n = exp(-(beta_{n+1} - beta_n) V)` and `G_n = 1` at the horizon.
///
/// Then `eta_n = mu_{beta_n}`. `V` is shifted to `min V = 0`; the shift is recorded in
/// `log_rescale`.
pub fn simulated_annealing(v: &[f64], betas: &[f64], proposal: &DMatrix<f64>, iterates: &[usize]) -> Result<ZooModel<FiniteModel>> {
    let k = v.len();
    if k == 0 || betas.is_empty() {
        return Err(Error::InvalidArgument("annealing needs states and at least beta_0".into()));
    }
    let horizon = betas.len() - 1;
    if iterates.len() != horizon {
        return Err(Error::InvalidArgument(format!("{} iterate counts for {horizon} transitions", iterates.len())));
    }
    if v.iter().chain(betas).any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel("non-finite energy or temperature".into()));
    }
    if betas.windows(2).any(|w| w[1] < w[0]) || betas[0] < 0.0 {
        return Err(Error::InvalidModel("inverse temperatures must be nonnegative and nondecreasing".into()));
    }
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = v.iter().map(|x| x - vmin).collect();
    let kernels = (1..=horizon)
        .map(|n| {
            let m = metropolis_kernel(&shifted, betas[n], proposal)?;
            Ok(m.pow(iterates[n - 1] as u32))
        })
        .collect::<Result<Vec<_>>>()?;
    let potentials = (0..=horizon)
        .map(|n| if n < horizon { shifted.iter().map(|x| (-(betas[n + 1] - betas[n]) * x).exp()).collect() } else { vec![1.0; k] })
        .collect();
    let model = FiniteModel::new(boltzmann_marginal(&shifted, betas[0]), kernels, potentials)?.with_functional("V", v.to_vec())?;
    let log_rescale = betas.iter().map(|b| -(b - betas[0]) * vmin).collect();
    let mut zoo = ZooModel { name: "simulated_annealing".into(), model, oracle: Oracle::ExactFlow, references: Vec::new(), log_rescale };
    exact_references(&mut zoo)?;
    let partition = |beta: f64| shifted.iter().map(|x| (-beta * x).exp()).sum::<f64>();
    for (n, &b) in betas.iter().enumerate() {
        zoo.push(format!("mu_{n}(V)"), boltzmann_marginal(&shifted, b).integrate(v), Oracle::ClosedForm);
        zoo.push(format!("log_partition_ratio_{n}"), (partition(b) / partition(betas[0])).ln(), Oracle::ClosedForm);
    }
    Ok(zoo)
}

/// Iterate counts `l_n` with `g_{n-1} beta(M_n) <= rho'` when `M_n` is the `k_n l_n`-fold
/// Metropolis kernel and `K^{k_n} >= eps_n nu_n`; `v = osc(V)`.
///
/// `eps` and `k` are indexed by `n = 1..`; `betas` holds `beta_0..beta_n`.
pub fn annealing_schedule_tuner(eps: &[f64], k: &[usize], v: f64, rho_prime: f64, betas: &[f64]) -> Result<Vec<usize>> {
    if !(rho_prime > 0.0 && rho_prime <= 1.0) {
        return Err(Error::InvalidArgument(format!("target rho' = {rho_prime} outside (0, 1]")));
    }
    if eps.len() != k.len() || betas.len() != eps.len() + 1 {
        return Err(Error::InvalidArgument("eps, k and betas lengths do not line up".into()));
    }
    (1..betas.len())
        .map(|n| {
            let (e, kn) = (eps[n - 1], k[n - 1]);
            if !(e > 0.0 && e <= 1.0) || kn == 0 {
                return Err(Error::InvalidArgument(format!("minorization eps_{n} = {e}, k_{n} = {kn} is unusable")));
            }
            let floor = e * (-betas[n] * kn as f64 * v).exp();
            if floor >= 1.0 {
                return Ok(1);
            }
            let num = (1.0 / rho_prime).ln() + v * (betas[n] - betas[n - 1]);
            let den = -(-floor).ln_1p();
            Ok(((num / den).ceil() as usize).max(1))
        })
        .collect()
}
