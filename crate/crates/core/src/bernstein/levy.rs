use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};

/// Lévy densities known in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevyDensity {
    /// `μ(t) = t⁻¹e⁻ᵗ`, the Lévy density of `log(1 + λ)`.
    GammaExplicit,
}

impl LevyDensity {
    pub fn density(&self, t: f64) -> f64 {
        match self {
            LevyDensity::GammaExplicit => (-t).exp() / t,
        }
    }

    /// `∫ (1 ∧ t) μ(t) dt` over `[lo, hi]`.
    pub fn truncated_mass(&self, lo: f64, hi: f64, quad: &QuadratureConfig) -> Result<f64> {
        let f = |u: f64| {
            let t = u.exp();
            t.min(1.0) * self.density(t) * t
        };
        let mut points = vec![lo.ln()];
        if lo < 1.0 && hi > 1.0 {
            points.push(0.0);
        }
        points.push(hi.ln());
        Ok(crate::quadrature::integrate_with_breakpoints(f, &points, quad)?.value)
    }

    /// `∫ (1 − e^{−λt}) μ(t) dt`, the Laplace exponent reconstructed from
    /// the density.
    pub fn laplace_exponent(&self, lambda: f64, quad: &QuadratureConfig) -> Result<f64> {
        let f = |u: f64| {
            let t = u.exp();
            -(-lambda * t).exp_m1() * self.density(t) * t
        };
        Ok(integrate(f, -40.0, 5.0, quad)?.value)
    }
}

/// Jump kernel of the gamma-subordinate Brownian motion,
/// `j(r) = ∫₀^∞ (4πt)^{−d/2} e^{−r²/4t} t⁻¹e⁻ᵗ dt`, by quadrature in `ln t`.
pub fn exact_jump_density_gamma(r: f64, d: usize, quad: &QuadratureConfig) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain("exact_jump_density_gamma", format!("r = {r} must be positive")));
    }
    if d == 0 {
        return Err(Error::domain("exact_jump_density_gamma", "dimension must be at least 1"));
    }
    let half_d = d as f64 / 2.0;
    let r2 = r * r;
    // log-integrand in s = ln t: −(d/2)ln(4πt) − r²/(4t) − t
    let ln_integrand = |s: f64| {
        let t = s.exp();
        -half_d * (4.0 * PI * t).ln() - r2 / (4.0 * t) - t
    };
    // mode of the integrand in s solves t² + (d/2) t − r²/4 = 0
    let t_star = 0.5 * (-half_d + (half_d * half_d + r2).sqrt());
    let s_star = t_star.ln();
    let peak = ln_integrand(s_star);
    // integrand is negligible (e^{-60} relative) beyond these points
    let s_lo = (r2 / 4.0 / (60.0 + half_d * 30.0)).ln().min(s_star - 1.0);
    let s_hi = (60.0 + half_d * 10.0f64).ln().max(s_star + 1.0);
    let scaled = |s: f64| (ln_integrand(s) - peak).exp();
    let cfg = QuadratureConfig {
        tolerance: 0.0,
        rel_tolerance: quad.rel_tolerance.min(1e-6),
        max_subdivisions: quad.max_subdivisions,
    };
    let r = crate::quadrature::integrate_with_breakpoints(scaled, &[s_lo, s_star, s_hi], &cfg)?;
    Ok(r.value * peak.exp())
}
