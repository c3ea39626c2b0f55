use nalgebra::DMatrix;

use super::{exact_references, Oracle, ZooModel};
use crate::error::{Error, Result};
use crate::fk::{FiniteModel, Measure};

/// Metropolis restriction of a `lambda`-reversible kernel to the set `a`: moves leaving `a`
/// are rejected. Rows outside `a` keep the base kernel.
fn restrict(base: &DMatrix<f64>, a: &[bool]) -> DMatrix<f64> {
    let k = base.nrows();
    let mut m = base.clone();
    for x in (0..k).filter(|&x| a[x]) {
        let mut rejected = 0.0;
        for y in (0..k).filter(|&y| !a[y]) {
            rejected += m[(x, y)];
            m[(x, y)] = 0.0;
        }
        m[(x, x)] += rejected;
    }
    m
}

/// Decreasing-subset model: `M_n` leaves `lambda` restricted to `A_n` invariant and
/// `G_n = 1_{A_{n+1}}`, so that `eta_n = lambda(. | A_n)` and `Z_n = lambda(A_n) / lambda(A_0)`.
///
/// `sets` holds `A_0 ⊇ A_1 ⊇ .. ⊇ A_n`; the horizon is `n`. With `floor > 0` the indicators are
/// replaced by `max(1_A, floor)`, which keeps the potentials in `(0, 1]`; `floor = 0` gives the
/// hard model. The terminal potential is `1_{A_n}`.
pub fn subset_restriction(lambda: &Measure, base: &DMatrix<f64>, sets: &[Vec<bool>], floor: f64) -> Result<ZooModel<FiniteModel>> {
    let k = lambda.len();
    if sets.is_empty() {
        return Err(Error::InvalidArgument("need at least the initial set A_0".into()));
    }
    if !(0.0..=1.0).contains(&floor) {
        return Err(Error::InvalidArgument(format!("floor {floor} outside [0, 1]")));
    }
    for (n, s) in sets.iter().enumerate() {
        if s.len() != k {
            return Err(Error::InvalidModel(format!("set A_{n} has {} flags for {k} states", s.len())));
        }
        if n > 0 && s.iter().zip(&sets[n - 1]).any(|(now, before)| *now && !before) {
            return Err(Error::InvalidModel(format!("A_{n} is not contained in A_{}", n - 1)));
        }
    }
    if base.nrows() != k || base.ncols() != k {
        return Err(Error::InvalidModel(format!("base kernel is {}x{}, expected {k}x{k}", base.nrows(), base.ncols())));
    }
    let w = lambda.weights();
    for x in 0..k {
        for y in 0..k {
            let defect = (w[x] * base[(x, y)] - w[y] * base[(y, x)]).abs();
            if defect > 1e-12 {
                return Err(Error::InvalidModel(format!("base kernel is not reversible at ({x}, {y}), defect {defect:e}")));
            }
        }
    }
    let mass = |s: &[bool]| s.iter().zip(w).filter(|(a, _)| **a).map(|(_, v)| v).sum::<f64>();
    let mass0 = mass(&sets[0]);
    if mass0 <= 0.0 {
        return Err(Error::ZeroMass(mass0));
    }
    let horizon = sets.len() - 1;
    let eta0 = Measure::probability(sets[0].iter().zip(w).map(|(a, v)| if *a { v / mass0 } else { 0.0 }).collect())?;
    let kernels = (1..=horizon).map(|n| restrict(base, &sets[n])).collect();
    let indicator = |s: &[bool]| s.iter().map(|a| if *a { 1.0 } else { floor }).collect::<Vec<_>>();
    let potentials = (0..=horizon).map(|n| indicator(&sets[(n + 1).min(horizon)])).collect();
    let model = if floor > 0.0 {
        FiniteModel::new(eta0, kernels, potentials)?
    } else {
        FiniteModel::with_hard_potentials(eta0, kernels, potentials)?
    };
    let name = if floor > 0.0 { "subset_restriction" } else { "subset_restriction_hard" };
    let mut zoo = ZooModel { name: name.into(), model, oracle: Oracle::ExactFlow, references: Vec::new(), log_rescale: vec![0.0; horizon + 1] };
    exact_references(&mut zoo)?;
    if floor == 0.0 {
        for (n, s) in sets.iter().enumerate() {
            zoo.push(format!("lambda(A_{n})"), mass(s) / mass0, Oracle::ClosedForm);
        }
    }
    Ok(zoo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lazy_ring(k: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(k, k);
        for x in 0..k {
            m[(x, x)] = 0.5;
            m[(x, (x + 1) % k)] += 0.25;
            m[(x, (x + k - 1) % k)] += 0.25;
        }
        m
    }

    fn nested(k: usize, sizes: &[usize]) -> Vec<Vec<bool>> {
        sizes.iter().map(|&s| (0..k).map(|x| x < s).collect()).collect()
    }

    #[test]
    fn full_space_has_unit_free_energy() {
        let zoo = subset_restriction(&Measure::uniform(6), &lazy_ring(6), &nested(6, &[6, 6, 6]), 0.0).unwrap();
        assert!(zoo.reference("log_Z_2").unwrap().abs() < 1e-15);
    }

    #[test]
    fn halving_gives_one_half() {
        let zoo = subset_restriction(&Measure::uniform(4), &lazy_ring(4), &nested(4, &[4, 2]), 0.0).unwrap();
        assert!((zoo.reference("log_Z_1").unwrap() - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn exact_flow_is_restricted_reference_measure() {
        let sizes = [8, 6, 4, 3];
        let zoo = subset_restriction(&Measure::uniform(8), &lazy_ring(8), &nested(8, &sizes), 0.0).unwrap();
        let flow = zoo.model.flow_exact(3).unwrap();
        for (n, eta) in flow.iter().enumerate() {
            for (x, w) in eta.weights().iter().enumerate() {
                let want = if x < sizes[n] { 1.0 / sizes[n] as f64 } else { 0.0 };
                assert!((w - want).abs() < 1e-14, "eta_{n}({x}) = {w}");
            }
            let z = zoo.reference(&format!("log_Z_{n}")).unwrap().exp();
            assert!((z - zoo.reference(&format!("lambda(A_{n})")).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn floored_variant_stays_in_unit_interval() {
        let zoo = subset_restriction(&Measure::uniform(8), &lazy_ring(8), &nested(8, &[8, 6, 4, 3]), 0.05).unwrap();
        assert!(!zoo.model.hard_potentials());
        let z = zoo.reference("log_Z_3").unwrap().exp();
        assert!(z > 3.0 / 8.0);
    }

    #[test]
    fn rejects_growing_sets_and_irreversible_kernels() {
        assert!(subset_restriction(&Measure::uniform(4), &lazy_ring(4), &nested(4, &[2, 3]), 0.0).is_err());
        let mut m = lazy_ring(4);
        m[(0, 1)] = 0.5;
        m[(0, 3)] = 0.0;
        assert!(subset_restriction(&Measure::uniform(4), &m, &nested(4, &[4, 2]), 0.0).is_err());
    }
}
