//! Backward particle smoothing.
//!
//! Given the particle generations `xi_0..xi_n`, the random backward kernels
//!
//! ```text
//! M_{p,eta^N}(i, j) = G_{p-1}(xi_{p-1}^j) H_p(xi_{p-1}^j, xi_p^i) / sum_k G_{p-1}(xi_{p-1}^k) H_p(xi_{p-1}^k, xi_p^i)
//! ```
//!
//! define a Markov chain on particle indices running from time `n` down to 0. Its path
//! law `Q_n^N` approximates the Feynman-Kac path measure `Q_n`.

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fk::{sample_cumulative, cumulative, FeynmanKac};
use crate::particle::RunOutput;
use crate::rng::{Purpose, RngStream};

/// Per-time components `f_p` of `sum_p f_p(x_p)`, optionally averaged over `n + 1`.
pub struct AdditiveFunctional<'f, S> {
    component: Box<dyn Fn(usize, &S) -> f64 + Send + Sync + 'f>,
    normalized: bool,
}

impl<'f, S> AdditiveFunctional<'f, S> {
    pub fn new(component: impl Fn(usize, &S) -> f64 + Send + Sync + 'f, normalized: bool) -> Self {
        Self { component: Box::new(component), normalized }
    }

    /// The same `f` at every time.
    pub fn stationary(f: impl Fn(&S) -> f64 + Send + Sync + 'f, normalized: bool) -> Self {
        Self::new(move |_, x| f(x), normalized)
    }

    pub fn eval(&self, p: usize, x: &S) -> f64 {
        (self.component)(p, x)
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }
}

impl AdditiveFunctional<'static, usize> {
    /// Tabulated components on a finite space, `components[p][x] = f_p(x)`.
    pub fn from_table(components: Vec<Vec<f64>>, normalized: bool) -> Self {
        Self::new(move |p, x| components[p][*x], normalized)
    }
}

/// Particle generations, their potentials and (lazily) the backward matrices.
pub struct TrajectoryStore<'a, M: FeynmanKac> {
    model: &'a M,
    states: Vec<Vec<M::State>>,
    potentials: Vec<Vec<f64>>,
    log_z: f64,
    cache: Option<Vec<OnceLock<Vec<Vec<f64>>>>>,
}

impl<'a, M: FeynmanKac> TrajectoryStore<'a, M> {
    /// `states[p]` holds generation `p`, `potentials[p]` holds `G_p(xi_p^j)` for `p < n`.
    pub fn new(model: &'a M, states: Vec<Vec<M::State>>, potentials: Vec<Vec<f64>>, log_z: f64) -> Result<Self> {
        if states.is_empty() || potentials.len() + 1 != states.len() {
            return Err(Error::InvalidArgument("store needs n + 1 generations and n potential rows".into()));
        }
        let n_particles = states[0].len();
        if states.iter().any(|s| s.len() != n_particles) || potentials.iter().any(|g| g.len() != n_particles) {
            return Err(Error::InvalidArgument("generations have different sizes".into()));
        }
        let allow_zero = model.allows_zero_potential();
        for (p, g) in potentials.iter().enumerate() {
            for &v in g {
                crate::fk::check_potential(p, v, allow_zero)?;
            }
        }
        Ok(Self { model, states, potentials, log_z, cache: None })
    }

    /// Build from a run made with genealogy retention.
    pub fn from_run(model: &'a M, run: &RunOutput<M::State>) -> Result<Self> {
        let states = run.genealogy.states()?.to_vec();
        let n = states.len() - 1;
        let potentials = (0..n)
            .map(|p| run.genealogy.potentials(p).map(|g| g.map(<[f64]>::to_vec).unwrap_or_default()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(model, states, potentials, run.population.log_free_energy)
    }

    /// Keep every backward matrix after its first use (memory `O(n N^2)`).
    pub fn with_cache(mut self) -> Self {
        self.cache = Some((0..=self.horizon()).map(|_| OnceLock::new()).collect());
        self
    }

    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn n_particles(&self) -> usize {
        self.states[0].len()
    }

    pub fn states(&self) -> &[Vec<M::State>] {
        &self.states
    }

    pub fn log_free_energy(&self) -> f64 {
        self.log_z
    }

    fn density(&self, n: usize, x: &M::State, y: &M::State) -> Result<f64> {
        let h = self.model.density(n, x, y).ok_or(Error::MissingDensity(n))?;
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::InvalidModel(format!("density at time {n} evaluated to {h}")));
        }
        Ok(h)
    }

    fn unnormalized_row(&self, n: usize, i: usize) -> Result<Vec<f64>> {
        let prev = &self.states[n - 1];
        let g = &self.potentials[n - 1];
        let y = &self.states[n][i];
        prev.iter().zip(g).map(|(x, gx)| Ok(gx * self.density(n, x, y)?)).collect()
    }

    /// Row `i` of the backward matrix at time `n >= 1`, a probability vector over generation `n - 1`.
    pub fn backward_row(&self, n: usize, i: usize) -> Result<Vec<f64>> {
        if n == 0 || n > self.horizon() {
            return Err(Error::InvalidArgument(format!("backward row at time {n} outside 1..={}", self.horizon())));
        }
        if let Some(cache) = &self.cache {
            if let Some(m) = cache[n].get() {
                return Ok(m[i].clone());
            }
        }
        let mut row = self.unnormalized_row(n, i)?;
        let total: f64 = row.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroRow { time: n, row: i });
        }
        row.iter_mut().for_each(|w| *w /= total);
        Ok(row)
    }

    /// The full `N x N` backward matrix at time `n`.
    pub fn backward_matrix(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        let compute = || (0..self.n_particles()).into_par_iter().map(|i| self.backward_row(n, i)).collect::<Result<Vec<_>>>();
        match &self.cache {
            Some(cache) => {
                if let Some(m) = cache[n].get() {
                    return Ok(m.clone());
                }
                let m = compute()?;
                Ok(cache[n].get_or_init(|| m).clone())
            }
            None => compute(),
        }
    }

    /// `v B_n`: push a row vector on generation `n` back to generation `n - 1`.
    ///
    /// Streams over rows so no `N x N` matrix is held unless caching is on.
    fn pull_back(&self, n: usize, v: &[f64]) -> Result<Vec<f64>> {
        if self.cache.is_some() {
            return Ok(vec_mat(v, &self.backward_matrix(n)?));
        }
        let n_particles = self.n_particles();
        let norms: Vec<f64> = (0..n_particles)
            .into_par_iter()
            .map(|i| {
                let total: f64 = self.unnormalized_row(n, i)?.iter().sum();
                if total > 0.0 {
                    Ok(total)
                } else {
                    Err(Error::ZeroRow { time: n, row: i })
                }
            })
            .collect::<Result<_>>()?;
        let prev = &self.states[n - 1];
        let g = &self.potentials[n - 1];
        (0..n_particles)
            .into_par_iter()
            .map(|j| {
                let mut acc = 0.0;
                for i in 0..n_particles {
                    if v[i] != 0.0 {
                        acc += v[i] * g[j] * self.density(n, &prev[j], &self.states[n][i])? / norms[i];
                    }
                }
                Ok(acc)
            })
            .collect()
    }

    /// Laws of the index `i_p` under `Q_n^N`, `p = 0..=n`. The time-`n` law is uniform.
    pub fn backward_marginals(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.horizon();
        let mut out = vec![Vec::new(); n + 1];
        out[n] = vec![1.0 / self.n_particles() as f64; self.n_particles()];
        for p in (1..=n).rev() {
            out[p - 1] = self.pull_back(p, &out[p])?;
        }
        Ok(out)
    }

    /// `Q_n^N(F)` for an additive functional, by the backward recursion in `O(n N^2)`.
    pub fn smoothed_additive(&self, f: &AdditiveFunctional<'_, M::State>) -> Result<f64> {
        let n = self.horizon();
        let marginals = self.backward_marginals()?;
        let mut total = 0.0;
        for (p, w) in marginals.iter().enumerate() {
            let values: Vec<f64> = self.states[p].par_iter().map(|x| f.eval(p, x)).collect();
            total += w.iter().zip(&values).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(if f.normalized() { total / (n + 1) as f64 } else { total })
    }

    /// One index path `(i_0, .., i_n)` drawn from `Q_n^N`; `sample` selects the stream.
    pub fn sample_backward_indices(&self, stream: &RngStream, sample: usize) -> Result<Vec<usize>> {
        let n = self.horizon();
        let mut rng = stream.stream(n, sample, Purpose::Backward);
        let mut path = vec![0; n + 1];
        path[n] = rng.random_range(0..self.n_particles());
        for p in (1..=n).rev() {
            let row = self.backward_row(p, path[p])?;
            path[p - 1] = sample_cumulative(&cumulative(row), rng.random());
        }
        Ok(path)
    }

    /// A state path drawn from `Q_n^N`.
    pub fn sample_backward_path(&self, stream: &RngStream, sample: usize) -> Result<Vec<M::State>> {
        let idx = self.sample_backward_indices(stream, sample)?;
        Ok(idx.iter().enumerate().map(|(p, &i)| self.states[p][i].clone()).collect())
    }

    /// Time-`n` marginal of `Q_n^N` as weighted atoms; it coincides with `eta_n^N`.
    pub fn marginal_consistency(&self) -> Result<Vec<(M::State, f64)>> {
        let n = self.horizon();
        let weights = self.backward_marginals()?.swap_remove(n);
        Ok(self.states[n].iter().cloned().zip(weights).collect())
    }

    /// `Z_n^N Q_n^N(f(X_n) Lambda_n)` with `Lambda_n = sum_{p=1}^n grad log(G_{p-1} H_p)(X_{p-1}, X_p)`.
    ///
    /// `grad_log(p, x, y)` returns the `dim`-vector gradient, or `None` when unavailable.
    pub fn sensitivity_gradient<F, D>(&self, f: F, dim: usize, grad_log: D) -> Result<Vec<f64>>
    where
        F: Fn(&M::State) -> f64 + Sync,
        D: Fn(usize, &M::State, &M::State) -> Option<Vec<f64>> + Sync,
    {
        let n = self.horizon();
        let n_particles = self.n_particles();
        let mut w: Vec<f64> = self.states[n].par_iter().map(|x| f(x) / n_particles as f64).collect();
        let mut grad = vec![0.0; dim];
        for p in (1..=n).rev() {
            // Contribution of the pair (X_{p-1}, X_p) and the pulled-back weights in one pass.
            let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n_particles)
                .into_par_iter()
                .map(|i| {
                    if w[i] == 0.0 {
                        return Ok((vec![0.0; n_particles], vec![0.0; dim]));
                    }
                    let row = self.backward_row(p, i)?;
                    let mut local = vec![0.0; dim];
                    for (j, b) in row.iter().enumerate() {
                        if *b == 0.0 {
                            continue;
                        }
                        let gl = grad_log(p, &self.states[p - 1][j], &self.states[p][i]).ok_or(Error::MissingGradient(p))?;
                        if gl.len() != dim {
                            return Err(Error::InvalidArgument(format!("gradient at time {p} has length {}", gl.len())));
                        }
                        for (l, v) in local.iter_mut().zip(gl) {
                            *l += b * v;
                        }
                    }
                    Ok((row, local))
                })
                .collect::<Result<_>>()?;
            let mut next = vec![0.0; n_particles];
            for (i, (row, local)) in rows.iter().enumerate() {
                for (g, l) in grad.iter_mut().zip(local) {
                    *g += w[i] * l;
                }
                for (nx, b) in next.iter_mut().zip(row) {
                    *nx += w[i] * b;
                }
            }
            w = next;
        }
        let z = self.log_z.exp();
        Ok(grad.into_iter().map(|g| g * z).collect())
    }
}

fn vec_mat(v: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    let cols = m.first().map_or(0, Vec::len);
    let mut out = vec![0.0; cols];
    for (vi, row) in v.iter().zip(m) {
        for (o, b) in out.iter_mut().zip(row) {
            *o += vi * b;
        }
    }
    out
}
