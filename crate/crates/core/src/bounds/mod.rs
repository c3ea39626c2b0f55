//! Concentration bounds: Legendre transforms, moment and entropy constants, and the
//! tail curves for marginals, genealogies, free energies and backward smoothers.

mod constants;
mod legendre;
mod tails;

pub use constants::{
    empirical_process_constant, entropy_integral, kintchine_b, orlicz_gaussian, orlicz_threshold, sqrt_log_covering_integral,
    CoverageClass,
};
pub use legendre::{bernstein_coefficients, bernstein_convert, inv_l_star, l_star, BernsteinTail, LegendreKind};
pub use tails::{
    backward_tail, bretagnolle_rio_add, empirical_process_tail, free_energy_tail, genealogical_tail, inverse_legendre_curve,
    marginal_tail, uniform_marginal_tail, Constant, Provenance, TailCurve,
};
