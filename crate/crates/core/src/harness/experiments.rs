use serde::{Deserialize, Serialize};
use serde_json::json;

use super::shell::shell_green_integral;
use super::verify::{verify_bound, BoundMode, ComparabilityReport, ProbeValue};
use super::{Assertion, ExperimentConfig, Outcome};
use crate::bernstein::{
    check_bernstein, ladder_exponent_kappa, log_grid, renewal_proxy_v, scaling_report,
    LaplaceExponentSpec, ScalingWindow,
};
use crate::error::{Error, Result};
use crate::estimates::{exit_time_lower, exit_time_upper, poisson_lower, poisson_upper};
use crate::geometry::{norm, unit_ball_volume, unit_sphere_area, Domain, Shape};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::simulate::{
    calibrate_sampler, estimate_exit_distribution, estimate_harmonic, estimate_occupation,
    richardson_exit_time, KillingRegion, McEstimate, OccupationGrid, SimConfig, Target,
};

fn shape_quadrature() -> QuadratureConfig {
    QuadratureConfig::with_tolerance(1e-14, 1e-7)
}

fn ball_radius(dom: &Domain, what: &str) -> Result<f64> {
    match dom.shape {
        Shape::Ball { radius } => Ok(radius),
        _ => Err(Error::Config(format!("{what} needs a ball domain, got {dom}"))),
    }
}

fn point_id(k: usize) -> String {
    format!("start{k}")
}

fn band_assertion(name: &str, report: &ComparabilityReport, ceiling: f64) -> Assertion {
    Assertion::new(
        name,
        report.band.is_finite() && report.band <= ceiling,
        format!("band {:.4} (ceiling {ceiling}), {} excluded", report.band, report.excluded),
    )
}

fn stability_assertion(name: &str, delta: f64, limit: f64) -> Assertion {
    Assertion::new(
        name,
        delta < limit,
        format!("relative change {delta:.4} under refinement (limit {limit})"),
    )
}

/// Occupation density per shell against the shell average of the Green
/// shape.
struct GreenRun {
    comparison: ComparabilityReport,
    excluded_per_start: Vec<usize>,
    mean_exit_times: Vec<f64>,
    censored: Vec<usize>,
}

fn green_run(
    spec: &LaplaceExponentSpec,
    dom: &Domain,
    grid: &OccupationGrid,
    starts: &[Vec<f64>],
    shapes: &[Vec<f64>],
    sim: &SimConfig,
) -> Result<GreenRun> {
    let mut values = Vec::new();
    let mut flat_shapes = Vec::new();
    let mut mean_exit_times = Vec::new();
    let mut censored = Vec::new();
    for (k, x0) in starts.iter().enumerate() {
        let occ = estimate_occupation(spec, dom, x0, grid, sim)
            .map_err(|e| e.context(format!("occupation from {}", point_id(k))))?;
        mean_exit_times.push(occ.mean_exit_time);
        censored.push(occ.censored);
        for (c, cell) in occ.cells.iter().enumerate() {
            values.push(ProbeValue {
                probe_id: format!("{}/cell{c:02}", point_id(k)),
                x: x0.clone(),
                y: vec![cell.cell.inner, cell.cell.outer],
                value: cell.density,
                se: cell.se,
            });
            flat_shapes.push(shapes[k][c]);
        }
    }
    let comparison = verify_bound(&values, &flat_shapes, BoundMode::TwoSided)?;
    let per = grid.len();
    let excluded_per_start = (0..starts.len())
        .map(|k| comparison.probes[k * per..(k + 1) * per].iter().filter(|p| p.excluded).count())
        .collect();
    Ok(GreenRun {
        comparison,
        excluded_per_start,
        mean_exit_times,
        censored,
    })
}

pub(crate) fn green_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let dom = cfg.domain()?;
    if !dom.is_bounded() || dom.dimension < 2 {
        return Err(Error::Config("green-verify needs a bounded domain in d ≥ 2".into()));
    }
    let starts = cfg.starts()?;
    let grid = OccupationGrid::radial(&dom, cfg.probes.shells, cfg.sim.lateral_truncation)?;
    let quad = shape_quadrature();
    let mut shapes = Vec::with_capacity(starts.len());
    for (k, x0) in starts.iter().enumerate() {
        let per_cell = grid
            .cells()
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let center = grid.shell_center(c).expect("bounded domains have radial shells");
                shell_green_integral(&spec, &dom, x0, center, cell.inner, cell.outer, &quad)
                    .map(|v| v / cell.volume)
                    .map_err(|e| e.context(format!("shape of {}/cell{c:02}", point_id(k))))
            })
            .collect::<Result<Vec<f64>>>()?;
        shapes.push(per_cell);
    }

    let base = green_run(&spec, &dom, &grid, &starts, &shapes, &cfg.sim)?;
    let th = &cfg.thresholds;
    let mut assertions = vec![band_assertion("band_within_ceiling", &base.comparison, th.band_ceiling)];
    let worst_excluded = base.excluded_per_start.iter().copied().max().unwrap_or(0);
    assertions.push(Assertion::new(
        "excluded_shells",
        worst_excluded <= th.max_excluded,
        format!(
            "{:?} of {} shells excluded per start (limit {})",
            base.excluded_per_start,
            grid.len(),
            th.max_excluded
        ),
    ));
    let mut comparisons = vec![("green".to_string(), base.comparison)];
    let mut refined_details = serde_json::Value::Null;
    if cfg.probes.refine {
        let sim = SimConfig {
            dt: cfg.sim.dt / 2.0,
            n_paths: cfg.sim.n_paths * 2,
            master_seed: cfg.sim.master_seed.wrapping_add(1),
            ..cfg.sim.clone()
        };
        let refined = green_run(&spec, &dom, &grid, &starts, &shapes, &sim)?;
        let delta = comparisons[0].1.compare_refined(&refined.comparison);
        assertions.push(stability_assertion("band_stability", delta, th.stability));
        assertions.push(band_assertion("refined_band_within_ceiling", &refined.comparison, th.band_ceiling));
        refined_details = json!({
            "dt": sim.dt,
            "n_paths": sim.n_paths,
            "excluded_per_start": refined.excluded_per_start,
            "mean_exit_times": refined.mean_exit_times,
        });
        comparisons.push(("green_refined".to_string(), refined.comparison));
    }
    Ok(Outcome {
        assertions,
        comparisons,
        details: json!({
            "cells": grid.cells(),
            "excluded_per_start": base.excluded_per_start,
            "mean_exit_times": base.mean_exit_times,
            "censored": base.censored,
            "refined": refined_details,
        }),
    })
}

pub(crate) fn exit_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let dom = cfg.domain()?;
    let radius = ball_radius(&dom, "exit-verify")?;
    let starts = cfg.starts()?;
    let fine_dt = cfg.probes.fine_dt.unwrap_or(cfg.sim.dt / 2.0);
    let mut estimates = Vec::with_capacity(starts.len());
    let mut upper_values = Vec::new();
    let mut upper_shapes = Vec::new();
    let mut lower_values = Vec::new();
    let mut lower_shapes = Vec::new();
    for (k, x0) in starts.iter().enumerate() {
        let s = norm(x0);
        let est = richardson_exit_time(&spec, &dom, x0, &cfg.sim, cfg.sim.dt, fine_dt, cfg.probes.richardson_order)
            .map_err(|e| e.context(format!("exit time from {}", point_id(k))))?;
        let probe = ProbeValue {
            probe_id: point_id(k),
            x: x0.clone(),
            y: vec![],
            value: est.value,
            se: est.se,
        };
        upper_values.push(probe.clone());
        upper_shapes.push(exit_time_upper(&spec, radius, s)?.value);
        // The lower shape holds on a concentric inner ball of radius below
        // a third of the radius.
        if s < radius / 3.0 {
            lower_values.push(probe);
            lower_shapes.push(exit_time_lower(&spec, radius)?.value);
        }
        estimates.push(est);
    }
    let th = &cfg.thresholds;
    let range = |c: f64| (1.0 / th.band_ceiling..=th.band_ceiling).contains(&c);
    let upper = verify_bound(&upper_values, &upper_shapes, BoundMode::Upper)?;
    let mut assertions = vec![Assertion::new(
        "upper_constant_in_range",
        range(upper.constant),
        format!("C = {:.4}", upper.constant),
    )];
    let mut comparisons = vec![("exit_upper".to_string(), upper)];
    if !lower_values.is_empty() {
        let lower = verify_bound(&lower_values, &lower_shapes, BoundMode::Lower)?;
        assertions.push(Assertion::new(
            "lower_constant_in_range",
            range(lower.constant),
            format!("c = {:.4}", lower.constant),
        ));
        comparisons.push(("exit_lower".to_string(), lower));
    }
    let flagged: Vec<usize> = estimates
        .iter()
        .enumerate()
        .filter(|(_, e)| e.coarse.censoring_flagged || e.fine.censoring_flagged)
        .map(|(k, _)| k)
        .collect();
    assertions.push(Assertion::new(
        "censoring",
        flagged.is_empty(),
        format!("starts with more than half the paths censored: {flagged:?}"),
    ));
    Ok(Outcome {
        assertions,
        comparisons,
        details: json!({ "radius": radius, "fine_dt": fine_dt, "estimates": estimates }),
    })
}

/// Shell average `(1/|S|) ∫_S f(|y|) dy` of a radial function over
/// `a ≤ |y| < b`.
fn radial_average(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64, d: usize) -> Result<f64> {
    let area = unit_sphere_area(d);
    let volume = unit_ball_volume(d) * (b.powi(d as i32) - a.powi(d as i32));
    let failure = std::cell::RefCell::new(None);
    let integral = integrate(
        |s| match f(s) {
            Ok(v) => area * s.powi(d as i32 - 1) * v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        &shape_quadrature(),
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(integral.value / volume),
    }
}

pub(crate) fn poisson_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let dom = cfg.domain()?;
    let d = dom.dimension;
    let radius = ball_radius(&dom, "poisson-verify")?;
    let offsets = &cfg.probes.exterior_offsets;
    if offsets.len() < 2 || offsets.windows(2).any(|w| !(0.0 < w[0] && w[0] < w[1])) {
        return Err(Error::Config("exterior offsets must be positive and increasing".into()));
    }
    let origin = vec![0.0; d];
    let targets: Vec<Target> = offsets
        .windows(2)
        .map(|w| Target::Shell {
            center: origin.clone(),
            inner: radius + w[0],
            outer: radius + w[1],
        })
        .collect();
    let volumes: Vec<f64> = offsets
        .windows(2)
        .map(|w| unit_ball_volume(d) * ((radius + w[1]).powi(d as i32) - (radius + w[0]).powi(d as i32)))
        .collect();
    let starts = cfg.starts()?;
    let (mut up_v, mut up_s, mut lo_v, mut lo_s) = (vec![], vec![], vec![], vec![]);
    let mut distributions = Vec::with_capacity(starts.len());
    for (k, x0) in starts.iter().enumerate() {
        let sx = norm(x0);
        let dist = estimate_exit_distribution(&spec, &dom, x0, &targets, &cfg.sim)
            .map_err(|e| e.context(format!("exit distribution from {}", point_id(k))))?;
        for (j, (p, w)) in dist.probabilities.iter().zip(offsets.windows(2)).enumerate() {
            let (a, b) = (radius + w[0], radius + w[1]);
            let probe = ProbeValue {
                probe_id: format!("{}/shell{j:02}", point_id(k)),
                x: x0.clone(),
                y: vec![a, b],
                value: p.value / volumes[j],
                se: p.se / volumes[j],
            };
            let upper = radial_average(|s| Ok(poisson_upper(&spec, d, radius, sx, s)?.value), a, b, d)?;
            up_v.push(probe.clone());
            up_s.push(upper);
            if sx == 0.0 {
                lo_v.push(probe);
                lo_s.push(radial_average(|s| Ok(poisson_lower(&spec, d, radius, s)?.value), a, b, d)?);
            }
        }
        distributions.push(dist);
    }
    let th = &cfg.thresholds;
    let upper = verify_bound(&up_v, &up_s, BoundMode::Upper)?;
    let mut assertions = vec![Assertion::new(
        "upper_constant_within_ceiling",
        upper.constant <= th.band_ceiling,
        format!("C = {:.4}", upper.constant),
    )];
    let mut comparisons = vec![("poisson_upper".to_string(), upper)];
    if !lo_v.is_empty() {
        let lower = verify_bound(&lo_v, &lo_s, BoundMode::Lower)?;
        assertions.push(Assertion::new(
            "lower_constant_above_floor",
            lower.constant >= 1.0 / th.band_ceiling,
            format!("c = {:.4}", lower.constant),
        ));
        comparisons.push(("poisson_lower".to_string(), lower));
    }
    Ok(Outcome {
        assertions,
        comparisons,
        details: json!({ "radius": radius, "targets": targets, "distributions": distributions }),
    })
}

/// Geometry of a boundary Harnack experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhpSetup {
    /// Boundary point `z`.
    pub boundary_point: Vec<f64>,
    /// Unit inward normal at `z`; probes are `z + δ n`.
    pub inward_normal: Vec<f64>,
    /// Radius `r` of the ball `B(z, r)`; probe depths span `[r/100, r/4]`.
    pub radius: f64,
    pub n_probes: usize,
    /// Exterior sets defining `u = P(X_τ ∈ A)` and `v = P(X_τ ∈ B)`; both
    /// must avoid `B(z, r)`.
    pub targets: (Target, Target),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhpProbe {
    pub x: Vec<f64>,
    pub delta: f64,
    /// `V(δ) = 1/√φ(δ⁻²)`.
    pub envelope: f64,
    pub u: McEstimate,
    pub v: McEstimate,
    pub hits_u: usize,
    pub hits_v: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhpReport {
    pub probes: Vec<BhpProbe>,
    /// Band of `u/v` across probes.
    pub ratio: ComparabilityReport,
    /// `u` against the envelope `V(δ)`.
    pub decay: ComparabilityReport,
    /// OLS slope of `ln u` against `ln V(δ)`.
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
}

/// Ordinary least squares `y ≈ a + b x`; returns `(b, se(b), a)`.
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let se = if xs.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (b, se, a)
}

/// Estimates two harmonic functions vanishing near `z` on the same paths and
/// measures their ratio band and boundary decay rate.
pub fn bhp_experiment(
    spec: &LaplaceExponentSpec,
    dom: &Domain,
    setup: &BhpSetup,
    cfg: &SimConfig,
) -> Result<BhpReport> {
    let d = dom.dimension;
    let z = &setup.boundary_point;
    let n = &setup.inward_normal;
    if z.len() != d || n.len() != d {
        return Err(Error::Config("boundary point and normal must match the dimension".into()));
    }
    let n_len = norm(n);
    if !(setup.radius > 0.0 && n_len > 0.0 && setup.n_probes >= 3) {
        return Err(Error::Config("bhp needs r > 0, a nonzero normal and at least 3 probes".into()));
    }
    let (a, b) = &setup.targets;
    if a.contains(z) || b.contains(z) {
        return Err(Error::Config("targets must lie outside B(z, r)".into()));
    }
    let depths = log_grid(setup.radius / 100.0, setup.radius / 4.0, setup.n_probes);
    let starts: Vec<Vec<f64>> = depths
        .iter()
        .map(|&t| z.iter().zip(n).map(|(zi, ni)| zi + t * ni / n_len).collect())
        .collect();
    let region = KillingRegion::new(dom.clone(), cfg)?;
    let dists = estimate_harmonic(spec, &region, &starts, &[a.clone(), b.clone()], cfg)?;
    let mut probes = Vec::with_capacity(starts.len());
    for (k, (x, dist)) in starts.iter().zip(&dists).enumerate() {
        if dist.hits[0] == 0 || dist.hits[1] == 0 {
            return Err(Error::Verification(format!(
                "probe {k} at {x:?} has {} hits in A and {} in B",
                dist.hits[0], dist.hits[1]
            )));
        }
        let delta = dom.delta(x)?;
        probes.push(BhpProbe {
            x: x.clone(),
            delta,
            envelope: renewal_proxy_v(spec, delta)?,
            u: dist.probabilities[0],
            v: dist.probabilities[1],
            hits_u: dist.hits[0],
            hits_v: dist.hits[1],
        });
    }
    let paths = cfg.n_paths as f64;
    let ratios: Vec<ProbeValue> = probes
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let r = p.u.value / p.v.value;
            // A and B are disjoint, so the two indicators have covariance −uv.
            let rel2 = (p.u.se / p.u.value).powi(2) + (p.v.se / p.v.value).powi(2) + 2.0 / paths;
            ProbeValue {
                probe_id: format!("probe{k}"),
                x: p.x.clone(),
                y: vec![],
                value: r,
                se: r * rel2.sqrt(),
            }
        })
        .collect();
    let ratio = verify_bound(&ratios, &vec![1.0; ratios.len()], BoundMode::TwoSided)?;
    let u_values: Vec<ProbeValue> = probes
        .iter()
        .enumerate()
        .map(|(k, p)| ProbeValue {
            probe_id: format!("probe{k}"),
            x: p.x.clone(),
            y: vec![],
            value: p.u.value,
            se: p.u.se,
        })
        .collect();
    let envelopes: Vec<f64> = probes.iter().map(|p| p.envelope).collect();
    let decay = verify_bound(&u_values, &envelopes, BoundMode::TwoSided)?;
    let xs: Vec<f64> = envelopes.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = probes.iter().map(|p| p.u.value.ln()).collect();
    let (slope, slope_se, intercept) = ols(&xs, &ys);
    Ok(BhpReport {
        probes,
        ratio,
        decay,
        slope,
        slope_se,
        intercept,
    })
}

fn bhp_setup(cfg: &ExperimentConfig, dom: &Domain) -> Result<BhpSetup> {
    let d = dom.dimension;
    let p = &cfg.probes;
    let boundary_point = match &p.boundary_point {
        Some(z) => z.clone(),
        None => {
            let radius = ball_radius(dom, "a default boundary point")?;
            let mut z = vec![0.0; d];
            z[0] = radius;
            z
        }
    };
    let inward_normal = match &p.inward_normal {
        Some(n) => n.clone(),
        None => {
            ball_radius(dom, "a default inward normal")?;
            let len = norm(&boundary_point);
            boundary_point.iter().map(|v| -v / len).collect()
        }
    };
    let targets = match &p.targets {
        Some(t) => t.clone(),
        None => {
            if d < 2 {
                return Err(Error::Config("default bhp targets need d ≥ 2".into()));
            }
            let radius = ball_radius(dom, "default bhp targets")?;
            let mut na = vec![0.0; d];
            na[0] = -1.0;
            let mut nb = vec![0.0; d];
            nb[1] = 1.0;
            (
                Target::HalfSpace { normal: na, offset: radius },
                Target::HalfSpace { normal: nb, offset: radius },
            )
        }
    };
    Ok(BhpSetup {
        boundary_point,
        inward_normal,
        radius: p.radius,
        n_probes: p.n_probes,
        targets,
    })
}

pub(crate) fn bhp_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let dom = cfg.domain()?;
    let setup = bhp_setup(cfg, &dom)?;
    let th = &cfg.thresholds;
    let base = bhp_experiment(&spec, &dom, &setup, &cfg.sim)?;
    let mut assertions = vec![
        band_assertion("ratio_band_within_ceiling", &base.ratio, th.band_ceiling),
        Assertion::new(
            "decay_slope",
            (base.slope - 1.0).abs() <= th.slope_tolerance,
            format!("slope {:.4} ± {:.4} (target 1 ± {})", base.slope, base.slope_se, th.slope_tolerance),
        ),
    ];
    let mut ratio = base.ratio.clone();
    let mut refined_report = None;
    if cfg.probes.refine {
        let sim = SimConfig {
            n_paths: cfg.sim.n_paths * 2,
            master_seed: cfg.sim.master_seed.wrapping_add(1),
            ..cfg.sim.clone()
        };
        let refined = bhp_experiment(&spec, &dom, &setup, &sim)?;
        let delta = ratio.compare_refined(&refined.ratio);
        assertions.push(stability_assertion("ratio_band_stability", delta, th.stability));
        refined_report = Some(refined);
    }
    let mut comparisons = vec![
        ("ratio".to_string(), ratio),
        ("decay".to_string(), base.decay.clone()),
    ];
    if let Some(r) = &refined_report {
        comparisons.push(("ratio_refined".to_string(), r.ratio.clone()));
    }
    Ok(Outcome {
        assertions,
        comparisons,
        details: json!({
            "setup": setup,
            "probes": base.probes,
            "slope": base.slope,
            "slope_se": base.slope_se,
            "intercept": base.intercept,
            "refined": refined_report.map(|r| json!({
                "probes": r.probes,
                "slope": r.slope,
                "slope_se": r.slope_se,
            })),
        }),
    })
}

pub(crate) fn condition_report(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let window = ScalingWindow::new(cfg.probes.window_min, cfg.probes.window_max);
    let scaling = scaling_report(&spec, &window, cfg.dimension);
    let bernstein = check_bernstein(&spec, 4, &log_grid(1e-6, 1e6, 1000));
    let mut assertions = vec![Assertion::new(
        "bernstein_signs",
        bernstein.passed,
        format!("{} sign violations up to order 4", bernstein.violations.len()),
    )];
    let mut comparisons = Vec::new();
    let quad = QuadratureConfig::default();
    let kappa: Result<Vec<(ProbeValue, f64)>> = log_grid(1e-2, 1e6, 25)
        .into_iter()
        .enumerate()
        .map(|(k, lambda)| {
            let value = ladder_exponent_kappa(&spec, lambda, &quad)?;
            let shape = spec.phi(lambda * lambda)?.sqrt();
            Ok((
                ProbeValue {
                    probe_id: format!("kappa{k:02}"),
                    x: vec![lambda],
                    y: vec![],
                    value,
                    se: 0.0,
                },
                shape,
            ))
        })
        .collect();
    match kappa.and_then(|pairs| {
        let (values, shapes): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        verify_bound(&values, &shapes, BoundMode::TwoSided)
    }) {
        Ok(report) => {
            assertions.push(band_assertion("kappa_band_within_ceiling", &report, cfg.thresholds.band_ceiling));
            comparisons.push(("kappa".to_string(), report));
        }
        Err(e) => assertions.push(Assertion::new("kappa_band_within_ceiling", false, e.to_string())),
    }
    Ok(Outcome {
        assertions,
        comparisons,
        details: json!({
            "family": spec.id(),
            "scaling": scaling,
            "bernstein": bernstein,
        }),
    })
}

pub(crate) fn calibrate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let p = &cfg.probes;
    let mut values = Vec::new();
    let mut exact = Vec::new();
    let mut worst: f64 = 0.0;
    for &t in &p.times {
        let cal = calibrate_sampler(&spec, t, &p.lambdas, p.draws, cfg.sim.master_seed)?;
        for c in cal {
            worst = worst.max(c.z_score());
            values.push(ProbeValue {
                probe_id: format!("t{t}_lambda{}", c.lambda),
                x: vec![t],
                y: vec![c.lambda],
                value: c.empirical,
                se: c.se,
            });
            exact.push(c.exact);
        }
    }
    let report = verify_bound(&values, &exact, BoundMode::TwoSided)?;
    Ok(Outcome {
        assertions: vec![Assertion::new(
            "laplace_transform_z",
            worst <= cfg.thresholds.z_max,
            format!("largest |z| = {worst:.3} (limit {})", cfg.thresholds.z_max),
        )],
        comparisons: vec![("laplace".to_string(), report)],
        details: json!({ "family": spec.id(), "draws": p.draws, "max_z": worst }),
    })
}
