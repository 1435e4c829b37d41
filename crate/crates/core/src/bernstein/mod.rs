//! Laplace exponents of subordinators and the quantities derived from them.
//!
//! Every comparability statement here is exposed with its constant set to 1.
//! The `*_proxy` kernels are small-distance shapes (`r ≤ 1`); they are not
//! asymptotically correct for large `r`.

mod family;
mod ladder;
mod levy;
mod scaling;
mod taylor;

pub use family::{Family, LaplaceExponentSpec, RelativisticVariant, MAX_ITERATION_DEPTH};
pub use ladder::ladder_exponent_kappa;
pub use levy::{exact_jump_density_gamma, LevyDensity};
pub use scaling::{
    check_a3, check_a4, check_a5, check_bernstein, low_growth_constant, log_grid,
    scaling_report, BernsteinReport, ScalingReport, ScalingWindow, SignViolation,
};

use crate::error::{Error, Result};

fn check_radius(op: &'static str, r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("r = {r} must be positive and finite")))
    }
}

fn check_dimension(op: &'static str, d: usize) -> Result<()> {
    if d >= 1 {
        Ok(())
    } else {
        Err(Error::domain(op, "dimension must be at least 1"))
    }
}

/// `1/√φ(r⁻²)`, comparable to the renewal function `V` of the ladder height
/// process of the one-dimensional projection.
pub fn renewal_proxy_v(spec: &LaplaceExponentSpec, r: f64) -> Result<f64> {
    check_radius("renewal_proxy_v", r)?;
    let (ln_phi, _) = spec.ln_phi_and_prime(-2.0 * r.ln());
    Ok((-0.5 * ln_phi).exp())
}

/// `r^{−d−2} φ'(r⁻²)`, the small-`r` shape of the jump kernel.
pub fn jump_proxy(spec: &LaplaceExponentSpec, r: f64, d: usize) -> Result<f64> {
    check_radius("jump_proxy", r)?;
    check_dimension("jump_proxy", d)?;
    Ok(ln_jump_proxy(spec, r.ln(), d).exp())
}

/// `r^{−d−2} φ'(r⁻²)/φ(r⁻²)²`, the small-`r` shape of the free Green kernel.
pub fn green_proxy(spec: &LaplaceExponentSpec, r: f64, d: usize) -> Result<f64> {
    check_radius("green_proxy", r)?;
    check_dimension("green_proxy", d)?;
    Ok(ln_green_proxy(spec, r.ln(), d).exp())
}

pub(crate) fn ln_jump_proxy(spec: &LaplaceExponentSpec, ln_r: f64, d: usize) -> f64 {
    let (_, ln_dphi) = spec.ln_phi_and_prime(-2.0 * ln_r);
    -(d as f64 + 2.0) * ln_r + ln_dphi
}

pub(crate) fn ln_green_proxy(spec: &LaplaceExponentSpec, ln_r: f64, d: usize) -> f64 {
    let (ln_phi, ln_dphi) = spec.ln_phi_and_prime(-2.0 * ln_r);
    -(d as f64 + 2.0) * ln_r + ln_dphi - 2.0 * ln_phi
}
