//! `∫_{inner ≤ |y−c| < outer} g_D(x, y) dy` for the two-sided Green shape.
//!
//! The integral is taken in polar coordinates around `x`: `y = x + s ω`,
//! where for each `s` the directions that land in the shell form a polar cap
//! band around the axis through `c` and `x`. The integrable singularity at
//! `s = 0` is removed by `s = s₁ e^{−u}`, which turns it into a tail in `u`.

use crate::bernstein::LaplaceExponentSpec;
use crate::error::{Error, Result};
use crate::estimates::ln_green_shape;
use crate::geometry::{dist, unit_sphere_area, Domain};
use crate::quadrature::{integrate, integrate_semi_infinite, integrate_with_breakpoints, QuadratureConfig};

struct ShellIntegrand<'a> {
    spec: &'a LaplaceExponentSpec,
    dom: &'a Domain,
    x: &'a [f64],
    delta_x: f64,
    inner: f64,
    outer: f64,
    /// `|x − c|`.
    c: f64,
    /// Unit vectors: `u` from `c` towards `x`, `v` orthogonal to it.
    u: Vec<f64>,
    v: Vec<f64>,
    weight: f64,
    quad: QuadratureConfig,
}

impl ShellIntegrand<'_> {
    fn d(&self) -> usize {
        self.x.len()
    }

    /// Polar angle range `[θ₁, θ₂]` (measured from `u`) of directions at
    /// distance `s` that land in the shell.
    fn angles(&self, s: f64) -> Option<(f64, f64)> {
        let (a, b, c) = (self.inner, self.outer, self.c);
        if s * c == 0.0 {
            let rho = if c == 0.0 { s } else { c };
            return (rho >= a && rho < b).then_some((0.0, std::f64::consts::PI));
        }
        let cos_lo = (a * a - c * c - s * s) / (2.0 * s * c);
        let cos_hi = (b * b - c * c - s * s) / (2.0 * s * c);
        if cos_hi <= -1.0 || cos_lo >= 1.0 {
            return None;
        }
        Some((cos_hi.min(1.0).acos(), cos_lo.max(-1.0).acos()))
    }

    /// `s^d ∫ 1_shell g(x, x + sω) dω` at `s = e^{ln_s}`.
    fn radial(&self, ln_s: f64) -> f64 {
        let s = ln_s.exp();
        let Some((t1, t2)) = self.angles(s) else {
            return 0.0;
        };
        let d = self.d();
        let f = |theta: f64| {
            let (st, ct) = theta.sin_cos();
            let y: Vec<f64> = (0..d)
                .map(|k| self.x[k] + s * (ct * self.u[k] + st * self.v[k]))
                .collect();
            let delta_y = self.dom.dist_to_complement(&y);
            if delta_y <= 0.0 {
                return 0.0;
            }
            let ln_g = ln_green_shape(self.spec, d, ln_s, self.delta_x, delta_y);
            (d as f64 * ln_s + ln_g).exp() * self.weight * st.powi(d as i32 - 2)
        };
        match integrate(f, t1, t2, &self.quad) {
            Ok(r) => r.value,
            Err(_) => f64::NAN,
        }
    }
}

/// Integral of the two-sided Green shape `g_D(x, ·)` over the shell
/// `inner ≤ |y − center| < outer` (restricted to `D`); `d ≥ 2`.
pub fn shell_green_integral(
    spec: &LaplaceExponentSpec,
    dom: &Domain,
    x: &[f64],
    center: &[f64],
    inner: f64,
    outer: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let d = dom.dimension;
    if d < 2 {
        return Err(Error::InvalidParameter("shell integration needs d ≥ 2".into()));
    }
    let delta_x = dom.delta(x)?;
    if delta_x <= 0.0 {
        return Err(Error::domain("shell_green_integral", "x must lie in the domain"));
    }
    let c = dist(x, center);
    let mut u = vec![0.0; d];
    if c > 0.0 {
        for k in 0..d {
            u[k] = (x[k] - center[k]) / c;
        }
    } else {
        u[0] = 1.0;
    }
    // Gram–Schmidt on the coordinate axis least aligned with `u`.
    let axis = (0..d)
        .min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs()))
        .expect("d ≥ 2");
    let mut v = vec![0.0; d];
    v[axis] = 1.0;
    let proj = u[axis];
    for k in 0..d {
        v[k] -= proj * u[k];
    }
    let nv = v.iter().map(|t| t * t).sum::<f64>().sqrt();
    v.iter_mut().for_each(|t| *t /= nv);

    let integrand = ShellIntegrand {
        spec,
        dom,
        x,
        delta_x,
        inner,
        outer,
        c,
        u,
        v,
        weight: unit_sphere_area(d - 1),
        quad: *quad,
    };

    let s_max = outer + c;
    let mut points: Vec<f64> = [(inner - c).abs(), (outer - c).abs(), inner + c, s_max]
        .into_iter()
        .filter(|p| *p > 0.0 && *p <= s_max)
        .collect();
    let s_min = if c >= inner && c < outer {
        0.0
    } else if c < inner {
        inner - c
    } else {
        c - outer
    };
    points.push(s_min);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let regular = |s: f64| integrand.radial(s.ln()) / s;
    let check = |v: f64, what: &str| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain("shell_green_integral", format!("{what} quadrature failed")))
        }
    };
    if s_min > 0.0 {
        let r = integrate_with_breakpoints(regular, &points, quad)?;
        return check(r.value, "shell");
    }
    let s1 = points.iter().copied().find(|p| *p > 0.0).unwrap_or(s_max);
    let ln_s1 = s1.ln();
    let near = integrate_semi_infinite(|t| integrand.radial(ln_s1 - t), 0.0, quad)?;
    let near = check(near.value, "near-field")?;
    let rest: Vec<f64> = points.into_iter().filter(|p| *p >= s1).collect();
    let far = if rest.len() >= 2 {
        check(integrate_with_breakpoints(regular, &rest, quad)?.value, "far-field")?
    } else {
        0.0
    };
    Ok(near + far)
}
