use crate::error::{Error, Result};
use crate::fk::Empirical;

/// Ancestor indices per generation and, when retention is on, the particle states and
/// potential values of every generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Genealogy<S> {
    retain: bool,
    // ancestors[g - 1][i] is the parent (in generation g - 1) of particle i of generation g.
    ancestors: Vec<Vec<usize>>,
    states: Vec<Vec<S>>,
    potentials: Vec<Option<Vec<f64>>>,
}

impl<S: Clone> Genealogy<S> {
    pub fn new(retain: bool) -> Self {
        Self { retain, ancestors: Vec::new(), states: Vec::new(), potentials: Vec::new() }
    }

    /// Rebuild from stored parts (used when reloading a saved run).
    pub fn from_parts(ancestors: Vec<Vec<usize>>, states: Vec<Vec<S>>, potentials: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if states.len() != ancestors.len() + 1 || potentials.len() != states.len() {
            return Err(Error::InvalidArgument("genealogy parts have inconsistent lengths".into()));
        }
        let n_particles = states[0].len();
        for row in &ancestors {
            if row.len() != n_particles || row.iter().any(|&a| a >= n_particles) {
                return Err(Error::InvalidArgument("ancestor row is not an index map".into()));
            }
        }
        Ok(Self { retain: true, ancestors, states, potentials })
    }

    pub(crate) fn push_generation(&mut self, states: &[S], potentials: Vec<f64>, ancestors: Vec<usize>) {
        if self.retain {
            self.states.push(states.to_vec());
            self.potentials.push(Some(potentials));
        }
        self.ancestors.push(ancestors);
    }

    pub(crate) fn push_terminal(&mut self, states: &[S], potentials: Option<Vec<f64>>) {
        if self.retain {
            self.states.push(states.to_vec());
            self.potentials.push(potentials);
        }
    }

    pub fn retained(&self) -> bool {
        self.retain
    }

    /// Number of completed transitions `n`.
    pub fn generations(&self) -> usize {
        self.ancestors.len()
    }

    pub fn ancestors(&self) -> &[Vec<usize>] {
        &self.ancestors
    }

    pub fn states(&self) -> Result<&[Vec<S>]> {
        if self.retain {
            Ok(&self.states)
        } else {
            Err(Error::MissingStates)
        }
    }

    /// `G_p(xi_p^j)` for generation `p`, if it was evaluated.
    pub fn potentials(&self, p: usize) -> Result<Option<&[f64]>> {
        if !self.retain {
            return Err(Error::MissingStates);
        }
        Ok(self.potentials.get(p).and_then(|g| g.as_deref()))
    }

    /// Index of the level-`p` ancestor of each terminal particle, for `p = 0..=n`.
    pub fn ancestral_indices(&self) -> Vec<Vec<usize>> {
        let n = self.ancestors.len();
        let n_particles = self.ancestors.first().map_or_else(|| self.states.first().map_or(0, Vec::len), Vec::len);
        let mut lines: Vec<Vec<usize>> = (0..n_particles).map(|i| vec![i; n + 1]).collect();
        for line in &mut lines {
            for g in (1..=n).rev() {
                line[g - 1] = self.ancestors[g - 1][line[g]];
            }
        }
        lines
    }

    /// The `N` ancestral lines `(xi_{0,n}^i, .., xi_{n,n}^i)`.
    pub fn ancestral_lines(&self) -> Result<Vec<Vec<S>>> {
        let states = self.states()?;
        let n = self.ancestors.len();
        let n_particles = states[n].len();
        let mut lines = Vec::with_capacity(n_particles);
        for i in 0..n_particles {
            let mut line = Vec::with_capacity(n + 1);
            let mut idx = i;
            line.push(states[n][idx].clone());
            for g in (1..=n).rev() {
                idx = self.ancestors[g - 1][idx];
                line.push(states[g - 1][idx].clone());
            }
            line.reverse();
            lines.push(line);
        }
        Ok(lines)
    }

    /// Occupation measure of the genealogical tree, an approximation of `Q_n`.
    pub fn tree_measure(&self) -> Result<Empirical<Vec<S>>> {
        Ok(Empirical::new(self.ancestral_lines()?))
    }
}
