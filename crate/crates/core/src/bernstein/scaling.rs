//! Finite-window checks of the growth hypotheses on `φ`.
//!
//! The hypotheses are asymptotic inequalities with unnamed constants, so a
//! grid can only certify them on a window. Exponents are read off as
//! least-squares slopes of log-ratios against `ln x`, one slope per base
//! point `λ`; the extremal slope over the window is the reported index.

use serde::{Deserialize, Serialize};

use super::LaplaceExponentSpec;

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingWindow {
    /// Lower end of the base-point window; plays the role of `λ₀`.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Largest ratio argument `x`; probes `x ∈ [1, x_max]`.
    pub x_max: f64,
    pub grid_size: usize,
}

impl Default for ScalingWindow {
    fn default() -> Self {
        Self {
            lambda_min: 1.0,
            lambda_max: 1e6,
            x_max: 1e4,
            grid_size: 64,
        }
    }
}

impl ScalingWindow {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Self {
        Self {
            lambda_min,
            lambda_max,
            ..Self::default()
        }
    }

    fn validated(&self) -> Self {
        let mut w = *self;
        w.grid_size = w.grid_size.max(16);
        if !(w.lambda_min > 0.0) {
            w.lambda_min = 1.0;
        }
        if !(w.lambda_max > w.lambda_min) {
            w.lambda_max = w.lambda_min * 10.0;
        }
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub grid_size: usize,
    /// Upper decay index of `φ'`: `φ'(λx)/φ'(λ) ≤ σ x^{−δ}`.
    pub delta_hat: Option<f64>,
    pub sigma_hat: Option<f64>,
    /// Lower decay index of `φ'`: `φ'(λx)/φ'(λ) ≥ σ₀ x^{−δ₀}`.
    pub delta0_hat: Option<f64>,
    pub sigma0_hat: Option<f64>,
    /// Lower growth index of `φ`: `φ(λx)/φ(λ) ≥ σ₁ x^{1−δ₁}`.
    pub delta1_hat: Option<f64>,
    pub sigma1_hat: Option<f64>,
    /// Largest relative excess of any probe over the fitted bound.
    pub max_violation: f64,
    pub satisfied: bool,
}

impl ScalingReport {
    fn empty(w: &ScalingWindow) -> Self {
        Self {
            lambda_min: w.lambda_min,
            lambda_max: w.lambda_max,
            grid_size: w.grid_size,
            delta_hat: None,
            sigma_hat: None,
            delta0_hat: None,
            sigma0_hat: None,
            delta1_hat: None,
            sigma1_hat: None,
            max_violation: 0.0,
            satisfied: false,
        }
    }
}

struct SlopeFit {
    /// Per base point: (intercept, slope) of `ln ratio ≈ b + s ln x`.
    fits: Vec<(f64, f64)>,
    /// (λ index, ln x, ln ratio) for every probe.
    samples: Vec<(usize, f64, f64)>,
}

fn fit_slopes<F: Fn(f64, f64) -> f64>(w: &ScalingWindow, ln_ratio: F) -> SlopeFit {
    let lambdas = log_grid(w.lambda_min, w.lambda_max, w.grid_size);
    let xs = log_grid(1.0, w.x_max, w.grid_size);
    let mut fits = Vec::with_capacity(lambdas.len());
    let mut samples = Vec::with_capacity(lambdas.len() * xs.len());
    for (i, &lambda) in lambdas.iter().enumerate() {
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x.ln(), ln_ratio(lambda, x))).collect();
        let n = pts.len() as f64;
        let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
        let slope = sxy / sxx;
        fits.push((mean_y - slope * mean_t, slope));
        samples.extend(pts.into_iter().map(|(t, y)| (i, t, y)));
    }
    SlopeFit { fits, samples }
}

/// Fitted one-sided bound with a fixed slope. For an upper bound the
/// constant is the largest per-`λ` intercept, for a lower bound the
/// smallest; the violation is the largest relative excess of a probe on the
/// wrong side of the bound.
fn bound_with_slope(fit: &SlopeFit, slope: f64, upper: bool) -> (f64, f64) {
    let n_lambda = fit.fits.len();
    let mut intercepts = vec![0.0; n_lambda];
    let mut counts = vec![0usize; n_lambda];
    for &(i, t, y) in &fit.samples {
        intercepts[i] += y - slope * t;
        counts[i] += 1;
    }
    let intercepts = intercepts.iter().zip(&counts).map(|(s, &c)| s / c as f64);
    let ln_sigma = if upper {
        intercepts.fold(f64::NEG_INFINITY, f64::max)
    } else {
        intercepts.fold(f64::INFINITY, f64::min)
    };
    let violation = fit
        .samples
        .iter()
        .map(|&(_, t, y)| {
            let excess = if upper {
                y - (ln_sigma + slope * t)
            } else {
                (ln_sigma + slope * t) - y
            };
            excess.exp_m1().max(0.0)
        })
        .fold(0.0, f64::max);
    (ln_sigma.exp(), violation)
}

fn ln_derivative_ratio(spec: &LaplaceExponentSpec) -> impl Fn(f64, f64) -> f64 + '_ {
    move |lambda, x| {
        let (_, a) = spec.ln_phi_and_prime((lambda * x).ln());
        let (_, b) = spec.ln_phi_and_prime(lambda.ln());
        a - b
    }
}

fn ln_value_ratio(spec: &LaplaceExponentSpec) -> impl Fn(f64, f64) -> f64 + '_ {
    move |lambda, x| {
        let (a, _) = spec.ln_phi_and_prime((lambda * x).ln());
        let (b, _) = spec.ln_phi_and_prime(lambda.ln());
        a - b
    }
}

/// Upper decay bound on `φ'`; `delta_hat` is the smallest per-`λ` decay rate.
pub fn check_a3(spec: &LaplaceExponentSpec, window: &ScalingWindow) -> ScalingReport {
    let w = window.validated();
    let fit = fit_slopes(&w, ln_derivative_ratio(spec));
    let delta = fit.fits.iter().map(|f| -f.1).fold(f64::INFINITY, f64::min);
    let (sigma, violation) = bound_with_slope(&fit, -delta, true);
    let mut r = ScalingReport::empty(&w);
    r.delta_hat = Some(delta);
    r.sigma_hat = Some(sigma);
    r.max_violation = violation;
    r.satisfied = delta > 0.0 && delta <= 1.0 + 1e-9 && sigma.is_finite();
    r
}

/// Lower decay bound on `φ'`; `delta0_hat` is the largest per-`λ` decay rate.
pub fn check_a4(spec: &LaplaceExponentSpec, window: &ScalingWindow) -> ScalingReport {
    let w = window.validated();
    let fit = fit_slopes(&w, ln_derivative_ratio(spec));
    let delta0 = fit.fits.iter().map(|f| -f.1).fold(f64::NEG_INFINITY, f64::max);
    let (sigma0, violation) = bound_with_slope(&fit, -delta0, false);
    let mut r = ScalingReport::empty(&w);
    r.delta0_hat = Some(delta0);
    r.sigma0_hat = Some(sigma0);
    r.max_violation = violation;
    r.satisfied = delta0 > 0.0 && delta0 < 2.0 && sigma0 > 0.0;
    r
}

/// Lower growth bound on `φ`; the smallest per-`λ` growth rate is `1 − δ₁`.
pub fn check_a5(spec: &LaplaceExponentSpec, window: &ScalingWindow) -> ScalingReport {
    let w = window.validated();
    let fit = fit_slopes(&w, ln_value_ratio(spec));
    let growth = fit.fits.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let (sigma1, violation) = bound_with_slope(&fit, growth, false);
    let mut r = ScalingReport::empty(&w);
    r.delta1_hat = Some(1.0 - growth);
    r.sigma1_hat = Some(sigma1);
    r.max_violation = violation;
    r.satisfied = growth > 0.0 && growth <= 1.0 && sigma1 > 0.0;
    r
}

/// All three checks merged into one record. `satisfied` follows the
/// dimension rules: the lower derivative bound is only needed for `d ≤ 2`
/// and the growth bound only for `d ≥ 2` with `δ ≤ 1/2`.
pub fn scaling_report(spec: &LaplaceExponentSpec, window: &ScalingWindow, d: usize) -> ScalingReport {
    let a3 = check_a3(spec, window);
    let a4 = check_a4(spec, window);
    let a5 = check_a5(spec, window);
    let delta = a3.delta_hat.unwrap_or(f64::NAN);
    let needs_a4 = d <= 2;
    let needs_a5 = d >= 2 && delta <= 0.5;
    let a4_ok = match d {
        1 => {
            let d0 = a4.delta0_hat.unwrap_or(f64::NAN);
            delta > 0.5 && d0 > 0.5 && d0 < 2.0 * delta - 0.5
        }
        _ => a4.satisfied,
    };
    let a5_ok = a5.satisfied && a5.delta1_hat.is_some_and(|d1| d1 >= delta - 1e-6);
    ScalingReport {
        delta0_hat: a4.delta0_hat,
        sigma0_hat: a4.sigma0_hat,
        delta1_hat: a5.delta1_hat,
        sigma1_hat: a5.sigma1_hat,
        max_violation: a3.max_violation.max(a4.max_violation).max(a5.max_violation),
        satisfied: a3.satisfied && (!needs_a4 || a4_ok) && (!needs_a5 || a5_ok),
        ..a3
    }
}

/// Constant `c` with `φ(λ) ≤ c λ φ'(λ)` derived from a lower growth bound
/// `φ(λx)/φ(λ) ≥ σ₁ x^{1−δ₁}`: with `a₁ = 2 ∨ (2/σ₁)^{1/(1−δ₁)}`,
/// concavity gives `c = a₁ − 1`.
pub fn low_growth_constant(sigma1: f64, delta1: f64) -> f64 {
    let a1 = f64::max(2.0, (2.0 / sigma1).powf(1.0 / (1.0 - delta1)));
    a1 - 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignViolation {
    pub lambda: f64,
    pub order: usize,
    /// `(−1)^{k−1} φ^{(k)}(λ)`; should be positive.
    pub signed_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub order: usize,
    pub grid_size: usize,
    /// Smallest `(−1)^{k−1} φ^{(k)}(λ) λ^k / φ(λ)` over the grid and orders.
    pub worst_margin: f64,
    pub violations: Vec<SignViolation>,
    pub passed: bool,
}

/// Verifies `(−1)^{k−1} φ^{(k)} > 0` for `k ≤ order` (at most 4) on `grid`.
pub fn check_bernstein(spec: &LaplaceExponentSpec, order: usize, grid: &[f64]) -> BernsteinReport {
    let order = order.clamp(1, 4);
    let mut worst = f64::INFINITY;
    let mut violations = Vec::new();
    for &lambda in grid {
        let t = spec.taylor(lambda);
        for (k, &dk) in t[1..].iter().enumerate().take(order) {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let signed = sign * dk;
            let margin = signed * lambda.powi(k as i32 + 1) / t[0];
            if margin.is_finite() {
                worst = worst.min(margin);
            }
            if !(signed > 0.0) {
                violations.push(SignViolation {
                    lambda,
                    order: k + 1,
                    signed_value: signed,
                });
            }
        }
    }
    BernsteinReport {
        order,
        grid_size: grid.len(),
        worst_margin: worst,
        passed: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::{Family, RelativisticVariant};

    #[test]
    fn stable_indices_are_exact() {
        for &alpha in &[0.5, 1.0, 1.5] {
            let s = LaplaceExponentSpec::stable(alpha).unwrap();
            let w = ScalingWindow::default();
            let a3 = check_a3(&s, &w);
            assert!((a3.delta_hat.unwrap() - (1.0 - alpha / 2.0)).abs() < 1e-9);
            assert!((a3.sigma_hat.unwrap() - 1.0).abs() < 1e-9);
            assert!(a3.max_violation < 1e-9 && a3.satisfied);
            let a5 = check_a5(&s, &w);
            assert!((a5.delta1_hat.unwrap() - (1.0 - alpha / 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn geometric_a3_index_is_one() {
        let g = LaplaceExponentSpec::geometric_stable(1.0).unwrap();
        let r = check_a3(&g, &ScalingWindow::new(1e2, 1e6));
        assert!((r.delta_hat.unwrap() - 1.0).abs() < 0.05, "{r:?}");
        assert!(r.satisfied);
    }

    #[test]
    fn merged_report_respects_dimension_rules() {
        let g = LaplaceExponentSpec::geometric_stable(1.0).unwrap();
        let r = scaling_report(&g, &ScalingWindow::default(), 3);
        assert!(r.satisfied, "{r:?}");
        assert!(r.delta_hat.is_some() && r.delta0_hat.is_some() && r.delta1_hat.is_some());
        let s = LaplaceExponentSpec::stable(1.0).unwrap();
        assert!(scaling_report(&s, &ScalingWindow::default(), 2).satisfied);
    }

    #[test]
    fn bernstein_signs_for_gamma() {
        let grid = log_grid(1e-3, 1e3, 400);
        let r = check_bernstein(&LaplaceExponentSpec::gamma(), 4, &grid);
        assert!(r.passed, "{:?}", &r.violations[..r.violations.len().min(3)]);
        assert!(r.worst_margin > 0.0);
    }

    #[test]
    fn literal_relativistic_form_fails_sign_check() {
        let spec = LaplaceExponentSpec::new(Family::RelativisticGeometricStable {
            alpha: 1.5,
            mass: 0.1,
            variant: RelativisticVariant::Literal,
        })
        .unwrap();
        let r = check_bernstein(&spec, 4, &log_grid(1e-4, 1e4, 200));
        assert!(!r.passed);
        assert!(r.violations.iter().any(|v| v.order == 2));
        let standard = LaplaceExponentSpec::relativistic_geometric_stable(1.5, 0.1).unwrap();
        let r = check_bernstein(&standard, 4, &log_grid(1e-4, 1e4, 200));
        assert!(r.passed, "{:?}", &r.violations[..r.violations.len().min(5)]);
    }

    #[test]
    fn low_growth_constant_bounds_phi() {
        let g = LaplaceExponentSpec::iterated_geometric_stable(1.0, 2).unwrap();
        let w = ScalingWindow::new(1.0, 1e6);
        let a5 = check_a5(&g, &w);
        // constant for which the growth bound holds at every probe
        let sigma1 = a5.sigma1_hat.unwrap() / (1.0 + a5.max_violation);
        let c = low_growth_constant(sigma1, a5.delta1_hat.unwrap());
        for l in log_grid(w.lambda_min, w.lambda_max, 200) {
            let j = g.jet(l);
            assert!(j.value <= c * l * j.d1 * (1.0 + 1e-12), "λ={l}");
        }
    }
}
