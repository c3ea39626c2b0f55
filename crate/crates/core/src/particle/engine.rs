use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::genealogy::Genealogy;
use crate::error::{Error, Result};
use crate::fk::{check_potential, cumulative, sample_cumulative, Empirical, FeynmanKac, Measure};
use crate::rng::{Purpose, RngStream};

/// `N` particle states at time `n` and the running `log Z_n^N = sum_{p<n} log eta_p^N(G_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticlePopulation<S> {
    pub time: usize,
    pub states: Vec<S>,
    pub log_free_energy: f64,
}

impl<S: Clone> ParticlePopulation<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `eta_n^N`, uniform weights on the particles.
    pub fn occupation_measure(&self) -> Empirical<S> {
        Empirical::new(self.states.clone())
    }

    /// `eta_n^N(f)`.
    pub fn mean<F: Fn(&S) -> f64>(&self, f: F) -> f64 {
        self.states.iter().map(f).sum::<f64>() / self.states.len() as f64
    }

    /// `(log Z_n^N, gamma_n^N(f))` with `gamma_n^N(f) = Z_n^N eta_n^N(f)`.
    pub fn free_energy_estimate<F: Fn(&S) -> f64>(&self, f: F) -> (f64, f64) {
        (self.log_free_energy, self.log_free_energy.exp() * self.mean(f))
    }
}

impl ParticlePopulation<usize> {
    /// Frequency vector of `eta_n^N` on a finite space.
    pub fn frequencies(&self, num_states: usize) -> Measure {
        Empirical::new(self.states.clone()).to_measure(num_states)
    }
}

/// Outcome of one selection: the selected states and the ancestor of each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<S> {
    pub population: ParticlePopulation<S>,
    pub ancestors: Vec<usize>,
}

/// Evaluate and range-check `G_n` on every particle (parallel map, ordered result).
pub fn evaluate_potentials<M: FeynmanKac>(model: &M, pop: &ParticlePopulation<M::State>) -> Result<Vec<f64>> {
    let n = pop.time;
    let allow_zero = model.allows_zero_potential();
    pop.states.par_iter().map(|x| check_potential(n, model.potential(n, x), allow_zero)).collect()
}

/// N particles drawn i.i.d. from `eta_0`.
pub fn init<M: FeynmanKac>(model: &M, n_particles: usize, stream: &RngStream) -> ParticlePopulation<M::State> {
    assert!(n_particles >= 1, "population size must be at least 1");
    let states = (0..n_particles)
        .into_par_iter()
        .map(|i| model.sample_initial(&mut stream.stream(0, i, Purpose::Init)))
        .collect();
    ParticlePopulation { time: 0, states, log_free_energy: 0.0 }
}

/// Accept-or-resample selection with acceptance probability `epsilon G_n(xi^i)`.
pub fn selection_step<M: FeynmanKac>(
    model: &M,
    pop: &ParticlePopulation<M::State>,
    epsilon: f64,
    stream: &RngStream,
) -> Result<Selection<M::State>> {
    let g = evaluate_potentials(model, pop)?;
    select_with_potentials(pop, &g, epsilon, stream)
}

pub(crate) fn select_with_potentials<S: Clone + Send + Sync>(
    pop: &ParticlePopulation<S>,
    g: &[f64],
    epsilon: f64,
    stream: &RngStream,
) -> Result<Selection<S>> {
    let n = pop.time;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be a nonnegative real")));
    }
    if let Some(&gmax) = g.iter().max_by(|a, b| a.total_cmp(b)) {
        if epsilon * gmax > 1.0 {
            return Err(Error::EpsilonTooLarge { time: n, product: epsilon * gmax });
        }
    }
    // Sequential prefix sum keeps the result independent of the worker count.
    let cum = cumulative(g.iter().copied());
    if !(cum[cum.len() - 1] > 0.0) {
        return Err(Error::AllDead(n));
    }
    let ancestors: Vec<usize> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.stream(n, i, Purpose::Select);
            let keep: f64 = rng.random();
            if keep < epsilon * g[i] {
                i
            } else {
                sample_cumulative(&cum, rng.random())
            }
        })
        .collect();
    let states = ancestors.iter().map(|&a| pop.states[a].clone()).collect();
    Ok(Selection {
        population: ParticlePopulation { time: n, states, log_free_energy: pop.log_free_energy },
        ancestors,
    })
}

/// Move each selected particle independently with `M_{n+1}`.
pub fn mutation_step<M: FeynmanKac>(model: &M, selected: &ParticlePopulation<M::State>, stream: &RngStream) -> ParticlePopulation<M::State> {
    let next = selected.time + 1;
    let states = selected
        .states
        .par_iter()
        .enumerate()
        .map(|(i, x)| model.sample_transition(next, x, &mut stream.stream(next, i, Purpose::Mutate)))
        .collect();
    ParticlePopulation { time: next, states, log_free_energy: selected.log_free_energy }
}

/// Everything one transition `xi_n -> xi_{n+1}` produced.
#[derive(Debug, Clone)]
pub struct StepOutcome<S> {
    pub next: ParticlePopulation<S>,
    pub ancestors: Vec<usize>,
    pub potentials: Vec<f64>,
    /// `(sum G)^2 / sum G^2`, zero when every particle died.
    pub ess: f64,
}

/// Accumulate `log eta_n^N(G_n)`, select, then mutate.
///
/// A generation where every potential vanishes sets the accumulator to `-inf` and keeps
/// the population unchanged through selection, so ensembles can still be summarized.
pub fn step_detailed<M: FeynmanKac>(
    model: &M,
    pop: &ParticlePopulation<M::State>,
    epsilon: f64,
    stream: &RngStream,
) -> Result<StepOutcome<M::State>> {
    let g = evaluate_potentials(model, pop)?;
    let sum: f64 = g.iter().sum();
    let sum_sq: f64 = g.iter().map(|v| v * v).sum();
    let mut accumulated = pop.clone();
    let (selected, ancestors, ess) = if sum > 0.0 {
        accumulated.log_free_energy += (sum / g.len() as f64).ln();
        let sel = select_with_potentials(&accumulated, &g, epsilon, stream)?;
        (sel.population, sel.ancestors, sum * sum / sum_sq)
    } else {
        accumulated.log_free_energy = f64::NEG_INFINITY;
        (accumulated, (0..g.len()).collect(), 0.0)
    };
    let next = mutation_step(model, &selected, stream);
    Ok(StepOutcome { next, ancestors, potentials: g, ess })
}

pub fn step<M: FeynmanKac>(
    model: &M,
    pop: &ParticlePopulation<M::State>,
    epsilon: f64,
    stream: &RngStream,
) -> Result<ParticlePopulation<M::State>> {
    Ok(step_detailed(model, pop, epsilon, stream)?.next)
}

/// Per-step summary recorded by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub log_z: f64,
    pub ess: f64,
    pub wall_ns: u128,
    pub functionals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub n_particles: usize,
    /// Acceptance parameter `epsilon_n`; 1 is admissible because `G_n <= 1`.
    pub epsilon: f64,
    pub retain_genealogy: bool,
}

impl EngineConfig {
    pub fn new(n_particles: usize) -> Self {
        Self { n_particles, epsilon: 1.0, retain_genealogy: false }
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn retain_genealogy(mut self, retain: bool) -> Self {
        self.retain_genealogy = retain;
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput<S> {
    pub population: ParticlePopulation<S>,
    pub genealogy: Genealogy<S>,
    pub records: Vec<StepRecord>,
}

/// Run the particle model from time 0 to `horizon`.
///
/// `observe` is called on each population `xi_0..xi_n`; its values end up in the
/// step records (one per registered functional).
pub fn run<M, F>(model: &M, config: &EngineConfig, horizon: usize, seed: u64, mut observe: F) -> Result<RunOutput<M::State>>
where
    M: FeynmanKac,
    F: FnMut(&ParticlePopulation<M::State>) -> Vec<f64>,
{
    if horizon > model.horizon() {
        return Err(Error::InvalidArgument(format!("horizon {horizon} exceeds model horizon {}", model.horizon())));
    }
    let stream = RngStream::new(seed);
    let start = Instant::now();
    let mut pop = init(model, config.n_particles, &stream);
    let mut genealogy = Genealogy::new(config.retain_genealogy);
    let mut records = Vec::with_capacity(horizon + 1);
    for n in 0..horizon {
        let out = step_detailed(model, &pop, config.epsilon, &stream)?;
        records.push(StepRecord {
            step: n,
            log_z: pop.log_free_energy,
            ess: out.ess,
            wall_ns: start.elapsed().as_nanos(),
            functionals: observe(&pop),
        });
        genealogy.push_generation(&pop.states, out.potentials, out.ancestors);
        pop = out.next;
    }
    let terminal_g = evaluate_potentials(model, &pop).ok();
    let ess = terminal_g
        .as_ref()
        .map(|g| {
            let s: f64 = g.iter().sum();
            let s2: f64 = g.iter().map(|v| v * v).sum();
            if s > 0.0 { s * s / s2 } else { 0.0 }
        })
        .unwrap_or(config.n_particles as f64);
    records.push(StepRecord {
        step: horizon,
        log_z: pop.log_free_energy,
        ess,
        wall_ns: start.elapsed().as_nanos(),
        functionals: observe(&pop),
    });
    genealogy.push_terminal(&pop.states, terminal_g);
    Ok(RunOutput { population: pop, genealogy, records })
}
