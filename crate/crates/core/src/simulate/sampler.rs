//! Exact-in-distribution increment samplers for the supported subordinators.
//!
//! Draws are produced as logarithms where the family allows it: gamma clocks
//! with shape far below one routinely underflow, and stable draws overflow.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01};

use crate::bernstein::{Family, LaplaceExponentSpec, RelativisticVariant};
use crate::error::{Error, Result};

/// Attempts allowed for one tilted-stable piece. With the clock split so that
/// each piece accepts with probability at least `e^{-1}`, exceeding this is
/// a numerical fault rather than bad luck.
const MAX_TILT_ATTEMPTS: u64 = 10_000_000;

/// `ln` of one positive `a`-stable draw at unit time, `E e^{−λS} = e^{−λ^a}`,
/// by Kanter's representation `S = (A(U)/E)^{(1−a)/a}`.
fn ln_unit_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let e: f64 = rng.sample(Exp1);
    let ln_a = (a * PI * u).sin().ln() / (1.0 - a) - (PI * u).sin().ln() / (1.0 - a)
        + ((1.0 - a) * PI * u).sin().ln()
        - (a * PI * u).sin().ln();
    (1.0 - a) / a * (ln_a - e.ln())
}

/// `ln` of a Gamma(shape, 1) draw. Shapes below one use
/// `G_{k} = G_{k+1} U^{1/k}`.
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        return g.ln();
    }
    let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
    let u: f64 = rng.sample(Open01);
    g.ln() + u.ln() / shape
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time t = {t} must be positive and finite")))
    }
}

/// One Gamma(shape, 1) draw; shapes below one are supported.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    check_time(shape)?;
    Ok(ln_gamma_draw(shape, rng).exp())
}

/// `S_t` for the `a`-stable subordinator, `E e^{−λS_t} = e^{−tλ^a}`;
/// `a = 1` is the pure drift `S_t = t`.
pub fn sample_stable_increment<R: Rng + ?Sized>(a: f64, t: f64, rng: &mut R) -> Result<f64> {
    check_time(t)?;
    if a == 1.0 {
        return Ok(t);
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!("stable index {a} must lie in (0, 1]")));
    }
    Ok((t.ln() / a + ln_unit_stable(a, rng)).exp())
}

/// `S_t` with `E e^{−λS_t} = (1 + λ^{α/2})^{−t}`: a stable subordinator run
/// on a gamma clock.
pub fn sample_geometric_stable_increment<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> Result<f64> {
    check_time(t)?;
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 2]")));
    }
    Ok(ln_geometric(alpha / 2.0, t.ln(), rng).exp())
}

fn ln_geometric<R: Rng + ?Sized>(a: f64, ln_t: f64, rng: &mut R) -> f64 {
    let ln_clock = ln_gamma_draw(ln_t.exp(), rng);
    if a == 1.0 || ln_clock == f64::NEG_INFINITY {
        return ln_clock;
    }
    ln_clock / a + ln_unit_stable(a, rng)
}

/// One exponentially tilted stable draw over clock time `u`, with
/// `E e^{−λS} = e^{−u((λ+θ)^a − θ^a)}`; returns the draw and the number of
/// proposals used.
pub fn sample_tilted_stable<R: Rng + ?Sized>(a: f64, theta: f64, u: f64, rng: &mut R) -> Result<(f64, u64)> {
    let scale_ln = u.ln() / a;
    for attempt in 1..=MAX_TILT_ATTEMPTS {
        let s = (scale_ln + ln_unit_stable(a, rng)).exp();
        let v: f64 = rng.sample(Open01);
        if v.ln() <= -theta * s {
            return Ok((s, attempt));
        }
    }
    Err(Error::Simulation(format!(
        "tilted stable rejection failed: a = {a}, θ = {theta}, clock = {u}, \
         expected acceptance {:.3e}",
        (-u * theta.powf(a)).exp()
    )))
}

/// `ψ`-subordinator at clock time `u`, `ψ(λ) = (λ+θ)^a − θ^a` with
/// `θ^a = m`. The clock is split into `⌈m u⌉` pieces so every piece accepts
/// with probability at least `e^{−1}`.
fn relativistic_at<R: Rng + ?Sized>(a: f64, theta: f64, m: f64, u: f64, rng: &mut R) -> Result<f64> {
    if u <= 0.0 {
        return Ok(0.0);
    }
    let pieces = (m * u).ceil().max(1.0);
    if pieces > 1e9 {
        return Err(Error::Simulation(format!(
            "relativistic clock {u} with mass {m} needs {pieces} pieces"
        )));
    }
    let piece = u / pieces;
    let mut total = 0.0;
    for _ in 0..pieces as u64 {
        total += sample_tilted_stable(a, theta, piece, rng)?.0;
    }
    Ok(total)
}

/// `S_t` with `E e^{−λS_t} = (1 + (λ+m^{2/α})^{α/2} − m)^{−t}`.
pub fn sample_relativistic_geometric_increment<R: Rng + ?Sized>(
    alpha: f64,
    m: f64,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    check_time(t)?;
    if !(alpha > 0.0 && alpha < 2.0 && m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < alpha < 2 and m > 0, got alpha = {alpha}, m = {m}"
        )));
    }
    let a = alpha / 2.0;
    let clock = ln_gamma_draw(t, rng).exp();
    relativistic_at(a, m.powf(1.0 / a), m, clock, rng)
}

/// Increment sampler bound to a validated Laplace exponent.
#[derive(Clone, Copy, Debug)]
pub enum SubordinatorSampler {
    Stable { a: f64 },
    Geometric { a: f64 },
    Iterated { a: f64, depth: u32 },
    Relativistic { a: f64, theta: f64, m: f64 },
    Gamma,
}

impl SubordinatorSampler {
    pub fn new(spec: &LaplaceExponentSpec) -> Result<Self> {
        Ok(match spec.family() {
            Family::Stable { alpha } => Self::Stable { a: alpha / 2.0 },
            Family::GeometricStable { alpha } => Self::Geometric { a: alpha / 2.0 },
            Family::IteratedGeometricStable { alpha, depth } => Self::Iterated {
                a: alpha / 2.0,
                depth,
            },
            Family::RelativisticGeometricStable {
                alpha,
                mass,
                variant: RelativisticVariant::Standard,
            } => {
                let a = alpha / 2.0;
                Self::Relativistic {
                    a,
                    theta: mass.powf(1.0 / a),
                    m: mass,
                }
            }
            Family::RelativisticGeometricStable { .. } => {
                return Err(Error::InvalidParameter(format!(
                    "{spec} is not a Bernstein function and has no subordinator to sample"
                )))
            }
            Family::Gamma => Self::Gamma,
        })
    }

    /// One increment over a time step of length `t > 0`.
    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        match *self {
            Self::Stable { a } => {
                if a == 1.0 {
                    Ok(t)
                } else {
                    Ok((t.ln() / a + ln_unit_stable(a, rng)).exp())
                }
            }
            Self::Geometric { a } => Ok(ln_geometric(a, t.ln(), rng).exp()),
            Self::Iterated { a, depth } => {
                // The `k`-fold exponent is the geometric exponent evaluated at
                // the `(k−1)`-fold one, so each level runs a geometric stable
                // subordinator on the clock produced by the previous level.
                let mut ln_clock = t.ln();
                for _ in 0..depth {
                    if ln_clock == f64::NEG_INFINITY {
                        break;
                    }
                    ln_clock = ln_geometric(a, ln_clock, rng);
                }
                Ok(ln_clock.exp())
            }
            Self::Relativistic { a, theta, m } => {
                let clock = ln_gamma_draw(t, rng).exp();
                relativistic_at(a, theta, m, clock, rng)
            }
            Self::Gamma => Ok(ln_gamma_draw(t, rng).exp()),
        }
    }
}
