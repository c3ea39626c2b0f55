use nalgebra::DMatrix;

use super::{exact_references, Oracle, ZooModel};
use crate::error::{Error, Result};
use crate::fk::{FiniteModel, Measure};
use crate::semigroup::{dobrushin, MixingCertificate};

/// `(1 - lambda h) Id + lambda h K`.
pub fn clock_kernel(k: &DMatrix<f64>, lambda: f64, h: f64) -> DMatrix<f64> {
    let a = lambda * h;
    DMatrix::identity(k.nrows(), k.ncols()) * (1.0 - a) + k * a
}

/// Time discretization with step `h` of a jump process with rates `lambda_n` and jump kernel
/// `K`, killed at rate `V`: `G_n = exp(-V h)`, `M_n = (1 - lambda_n h) Id + lambda_n h K`.
///
/// `lambdas` holds `lambda_1..lambda_n`. With `kappa = beta(K)`, `v = osc(V)` and
/// `alpha = min_n lambda_n (1 - kappa) - v > 0`, the model satisfies H_0 with `g <= exp(h v)` and
/// `rho <= exp(-alpha h)`; that certificate is returned.
pub fn geometric_clock_discretization(
    eta0: Measure,
    v: &[f64],
    k: &DMatrix<f64>,
    lambdas: &[f64],
    h: f64,
) -> Result<(ZooModel<FiniteModel>, MixingCertificate)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step h = {h} must be positive")));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidModel("killing rate V must be nonnegative".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l * h <= 1.0)) {
        return Err(Error::InvalidModel(format!("jump rate {l} outside (0, 1/h]")));
    }
    let kappa = dobrushin(k);
    let osc = v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha = lambda_min * (1.0 - kappa) - osc;
    if !(alpha > 0.0) {
        return Err(Error::InvalidModel(format!(
            "rates too small for H_0: lambda (1 - beta(K)) - osc(V) = {alpha} with beta(K) = {kappa}"
        )));
    }
    let horizon = lambdas.len();
    let kernels = lambdas.iter().map(|l| clock_kernel(k, *l, h)).collect();
    let g: Vec<f64> = v.iter().map(|x| (-x * h).exp()).collect();
    let model = FiniteModel::new(eta0, kernels, vec![g; horizon + 1])?;
    let cert = MixingCertificate::H0 { rho: (-alpha * h).exp(), g: (h * osc).exp() };
    let mut zoo = ZooModel {
        name: "geometric_clock".into(),
        model,
        oracle: Oracle::ExactFlow,
        references: Vec::new(),
        log_rescale: vec![0.0; horizon + 1],
    };
    exact_references(&mut zoo)?;
    zoo.push("alpha", alpha, Oracle::ClosedForm);
    Ok((zoo, cert))
}
