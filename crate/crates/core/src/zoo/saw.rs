use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Oracle, ZooModel};
use crate::error::{Error, Result};
use crate::fk::FeynmanKac;

/// Largest walk length for which reference counts are enumerated.
pub const ENUMERATION_LIMIT: usize = 12;

/// Historical simple random walk on `Z^d` started at the origin, with
/// `G_n(x_0..x_n) = 1{x_n not in {x_0..x_{n-1}}}`.
///
/// The state is the flattened path (`dim` coordinates per point). The probability that an
/// `n`-step walk is self-avoiding is `Z_n eta_n(G_n)`, estimated by
/// [`SelfAvoidingWalk::saw_fraction_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelfAvoidingWalk {
    pub dim: usize,
    pub horizon: usize,
}

impl SelfAvoidingWalk {
    pub fn new(dim: usize, horizon: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("lattice dimension must be positive".into()));
        }
        Ok(Self { dim, horizon })
    }

    /// `gamma_n^N(G_n)` for a population at time `n`.
    pub fn saw_fraction_estimate(&self, pop: &crate::particle::ParticlePopulation<Vec<i32>>) -> f64 {
        pop.free_energy_estimate(|p| self.potential(pop.time, p)).1
    }
}

impl FeynmanKac for SelfAvoidingWalk {
    type State = Vec<i32>;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial(&self, _rng: &mut ChaCha8Rng) -> Vec<i32> {
        vec![0; self.dim]
    }

    fn sample_transition(&self, _n: usize, x: &Vec<i32>, rng: &mut ChaCha8Rng) -> Vec<i32> {
        let mv = rng.random_range(0..2 * self.dim);
        let mut next = x.clone();
        let last = x.len() - self.dim;
        next.extend_from_slice(&x[last..]);
        next[last + self.dim + mv / 2] += if mv % 2 == 0 { 1 } else { -1 };
        next
    }

    fn potential(&self, _n: usize, x: &Vec<i32>) -> f64 {
        let (earlier, last) = x.split_at(x.len() - self.dim);
        if earlier.chunks(self.dim).any(|p| p == last) {
            0.0
        } else {
            1.0
        }
    }

    fn allows_zero_potential(&self) -> bool {
        true
    }
}

/// Number of self-avoiding `n`-step walks on `Z^d` from the origin, by depth-first search.
pub fn count_self_avoiding(dim: usize, n: usize) -> u64 {
    let side = 2 * n + 1;
    let cells = side.pow(dim as u32);
    let mut visited = vec![false; cells];
    let strides: Vec<usize> = (0..dim).map(|i| side.pow(i as u32)).collect();
    let origin: usize = strides.iter().map(|s| s * n).sum();
    fn dfs(at: usize, left: usize, visited: &mut [bool], strides: &[usize]) -> u64 {
        if left == 0 {
            return 1;
        }
        visited[at] = true;
        let mut total = 0;
        for &s in strides {
            // Walks of length n never leave the box, so neither neighbour wraps.
            for next in [at + s, at - s] {
                if !visited[next] {
                    total += dfs(next, left - 1, visited, strides);
                }
            }
        }
        visited[at] = false;
        total
    }
    if n == 0 {
        return 1;
    }
    dfs(origin, n, &mut visited, &strides)
}

/// The historical walk model with enumerated `saw_fraction_p = c_p (2d)^{-p}` for
/// `p <= min(n, 12)`.
pub fn self_avoiding_walk(dim: usize, n: usize) -> Result<ZooModel<SelfAvoidingWalk>> {
    let model = SelfAvoidingWalk::new(dim, n)?;
    let mut zoo = ZooModel { name: "self_avoiding_walk".into(), model, oracle: Oracle::Enumeration, references: Vec::new(), log_rescale: vec![0.0; n + 1] };
    for p in 0..=n.min(ENUMERATION_LIMIT) {
        let c = count_self_avoiding(dim, p);
        zoo.push(format!("saw_count_{p}"), c as f64, Oracle::Enumeration);
        zoo.push(format!("saw_fraction_{p}"), c as f64 / ((2 * dim) as f64).powi(p as i32), Oracle::Enumeration);
    }
    Ok(zoo)
}
