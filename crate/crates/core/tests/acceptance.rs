//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
//! any criterion fails. Run with `cargo test --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use sbm_core::bernstein::{
    check_a3, check_a5, check_bernstein, exact_jump_density_gamma, green_proxy, jump_proxy,
    ladder_exponent_kappa, log_grid, LaplaceExponentSpec, ScalingWindow,
};
use sbm_core::estimates::{exit_time_lower, exit_time_upper};
use sbm_core::geometry::{Ball, Domain};
use sbm_core::harness::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport};
use sbm_core::quadrature::{integrate, QuadratureConfig};
use sbm_core::simulate::{
    calibrate_sampler, estimate_exit_distribution, SimConfig, Target, TimeStepping,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn spec(id: &str) -> LaplaceExponentSpec {
    id.parse().expect("valid family id")
}

fn builtin_families() -> Vec<LaplaceExponentSpec> {
    [
        "stable{alpha=0.5}",
        "stable{alpha=1}",
        "stable{alpha=1.5}",
        "geom{alpha=1}",
        "geom{alpha=2}",
        "itgeom{alpha=1,n=2}",
        "itgeom{alpha=1.5,n=4}",
        "relgeom{alpha=1,m=1}",
        "relgeom{alpha=0.6,m=3}",
        "gamma",
    ]
    .into_iter()
    .map(spec)
    .collect()
}

fn band(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi / lo
}

fn bernstein_calculus() -> Outcome {
    let start = Instant::now();
    let grid = log_grid(1e-6, 1e6, 10_000);
    let mut failures = Vec::new();
    for s in builtin_families() {
        let mut prev: Option<(f64, f64)> = None;
        for &l in &grid {
            let (phi, dphi) = (s.phi(l).unwrap(), s.phi_prime(l).unwrap());
            if l * dphi > phi * (1.0 + 1e-9) {
                failures.push(format!("{s}: λφ' > φ at {l}"));
                break;
            }
            let eta1 = l * l * dphi;
            let eta2 = eta1 / (phi * phi);
            if let Some((p1, p2)) = prev {
                if eta1 < p1 * (1.0 - 1e-10) || eta2 < p2 * (1.0 - 1e-10) {
                    failures.push(format!("{s}: η inversion at {l}"));
                    break;
                }
            }
            prev = Some((eta1, eta2));
        }
        let signs = check_bernstein(&s, 4, &grid);
        if !signs.passed {
            failures.push(format!("{s}: {} sign violations", signs.violations.len()));
        }
    }
    let elapsed = start.elapsed();
    check(
        failures.is_empty() && within(elapsed, 5.0),
        format!("{} families, failures {failures:?}, {:.2}s", builtin_families().len(), elapsed.as_secs_f64()),
    )
}

fn scaling_indices() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    let window = ScalingWindow::default();
    for alpha in [0.5, 1.0, 1.5] {
        let s = LaplaceExponentSpec::stable(alpha).unwrap();
        let delta = check_a3(&s, &window).delta_hat.unwrap();
        // The growth exponent of φ is α/2; the reported index δ₁ is defined
        // through φ(λx)/φ(λ) ≥ σ₁ x^{1−δ₁}.
        let growth = 1.0 - check_a5(&s, &window).delta1_hat.unwrap();
        ok &= (delta - (1.0 - alpha / 2.0)).abs() <= 0.02 && (growth - alpha / 2.0).abs() <= 0.02;
        notes.push(format!("α={alpha}: δ̂={delta:.4}, 1−δ̂₁={growth:.4}"));
    }
    let geom = check_a3(&spec("geom{alpha=1}"), &ScalingWindow::new(1e2, 1e6)).delta_hat.unwrap();
    ok &= (geom - 1.0).abs() <= 0.05;
    notes.push(format!("geom(1): δ̂={geom:.4}"));
    let elapsed = start.elapsed();
    check(ok && within(elapsed, 10.0), format!("{}; {:.2}s", notes.join(", "), elapsed.as_secs_f64()))
}

fn ladder_exponent() -> Outcome {
    let quad = QuadratureConfig::default();
    let stable = LaplaceExponentSpec::stable(1.0).unwrap();
    let worst = [0.25, 1.0, 4.0, 100.0]
        .iter()
        .map(|&l| (ladder_exponent_kappa(&stable, l, &quad).unwrap() / l.sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut ok = worst <= 1e-6;
    let mut notes = vec![format!("stable(1) max rel err {worst:.2e}")];
    for s in [spec("geom{alpha=1}"), LaplaceExponentSpec::gamma()] {
        let b = band(log_grid(1e-2, 1e6, 40).into_iter().map(|l| {
            ladder_exponent_kappa(&s, l, &quad).unwrap() / s.phi(l * l).unwrap().sqrt()
        }));
        ok &= b <= 10.0;
        notes.push(format!("{s} band {b:.3}"));
    }
    check(ok, notes.join(", "))
}

fn stable_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let alpha: f64 = rng.random_range(0.05..1.95);
        let r: f64 = 10f64.powf(rng.random_range(-3.0..1.0));
        let d: usize = rng.random_range(1..=8);
        let s = LaplaceExponentSpec::stable(alpha).unwrap();
        let exact = alpha / 2.0 * r.powf(alpha - d as f64);
        worst = worst.max((green_proxy(&s, r, d).unwrap() / exact - 1.0).abs());
    }
    check(worst <= 1e-12, format!("max relative error {worst:.2e} over 1000 triples"))
}

fn sampler_calibration() -> Outcome {
    let start = Instant::now();
    let families = [
        "stable{alpha=0.5}",
        "stable{alpha=1}",
        "stable{alpha=1.5}",
        "geom{alpha=1}",
        "geom{alpha=2}",
        "relgeom{alpha=1,m=1}",
    ];
    let mut worst: (f64, String) = (0.0, String::new());
    for (k, id) in families.iter().enumerate() {
        let s = spec(id);
        for (j, t) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let lambdas = [0.5, 1.0, 4.0];
            let cal = calibrate_sampler(&s, t, &lambdas, 100_000, 1000 + 10 * k as u64 + j as u64).unwrap();
            for c in cal {
                if c.z_score() > worst.0 {
                    worst = (c.z_score(), format!("{id} t={t} λ={}", c.lambda));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst.0 <= 3.0 && within(elapsed, 60.0),
        format!("largest |z| {:.3} at {}; {:.1}s", worst.0, worst.1, elapsed.as_secs_f64()),
    )
}

fn gamma_jump_kernel() -> Outcome {
    let quad = QuadratureConfig::with_tolerance(1e-300, 1e-10);
    let g = LaplaceExponentSpec::gamma();
    let b = band(
        log_grid(1e-3, 1.0, 50)
            .into_iter()
            .map(|r| exact_jump_density_gamma(r, 3, &quad).unwrap() / jump_proxy(&g, r, 3).unwrap()),
    );
    check(b <= 10.0, format!("band {b:.4} over 50 radii"))
}

/// `E_xτ_B(0,1)` for the isotropic α-stable process with symbol `|ξ|^α`.
fn stable_ball_exit_time(alpha: f64, d: usize, rho: f64) -> f64 {
    let d = d as f64;
    gamma(d / 2.0) / (2f64.powf(alpha) * gamma(1.0 + alpha / 2.0) * gamma((d + alpha) / 2.0))
        * (1.0 - rho * rho).powf(alpha / 2.0)
}

fn exit_time_oracle() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new(ExperimentKind::ExitVerify, "stable{alpha=1}");
    cfg.domain = Some("ball:1".into());
    cfg.sim.dt = 0.004;
    cfg.sim.n_paths = 100_000;
    cfg.sim.master_seed = 7;
    cfg.probes.fine_dt = Some(0.001);
    cfg.probes.starts = vec![vec![0.0; 3], vec![0.25, 0.0, 0.0], vec![0.5, 0.0, 0.0], vec![0.0, 0.75, 0.0]];
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let upper = report.comparison("exit_upper").unwrap();
    let lower = report.comparison("exit_lower").unwrap();
    let mc = upper.probes[0].empirical;
    let exact = stable_ball_exit_time(1.0, 3, 0.0);
    let rel = (mc / exact - 1.0).abs();
    // Independent check of the shapes used by the harness.
    let shape_lo = exit_time_lower(&spec("stable{alpha=1}"), 1.0).unwrap().value;
    let shape_hi = exit_time_upper(&spec("stable{alpha=1}"), 1.0, 0.0).unwrap().value;
    let in_range = |c: f64| (1e-2..=1e2).contains(&c);
    let elapsed = start.elapsed();
    check(
        rel <= 0.10
            && in_range(upper.constant)
            && in_range(lower.constant)
            && lower.constant * shape_lo <= mc
            && mc <= upper.constant * shape_hi
            && within(elapsed, 600.0),
        format!(
            "E₀τ ≈ {mc:.4} vs exact {exact:.4} (rel {rel:.3}); C_upper {:.3}, c_lower {:.3}; {:.0}s",
            upper.constant,
            lower.constant,
            elapsed.as_secs_f64()
        ),
    )
}

fn green_comparability() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for (family, dt) in [("stable{alpha=1}", 2e-3), ("geom{alpha=1}", 1e-2)] {
        let mut cfg = ExperimentConfig::new(ExperimentKind::GreenVerify, family);
        cfg.domain = Some("ball:1".into());
        cfg.sim.dt = dt;
        cfg.sim.n_paths = 100_000;
        cfg.sim.master_seed = 11;
        cfg.probes.starts = vec![vec![0.0; 3], vec![0.6, 0.0, 0.0]];
        cfg.probes.shells = 16;
        cfg.probes.refine = true;
        let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let base = report.comparison("green").unwrap();
        let refined = report.comparison("green_refined").unwrap();
        let delta = base.stability_delta.unwrap();
        let excluded: Vec<u64> = report.details["excluded_per_start"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        ok &= base.band.is_finite()
            && base.band <= 100.0
            && refined.band <= 100.0
            && delta < 0.2
            && excluded.iter().all(|&e| e <= 4);
        notes.push(format!(
            "{family}: band {:.3} → {:.3} (Δ {:.3}), excluded {excluded:?}",
            base.band, refined.band, delta
        ));
    }
    check(ok, format!("{}; {:.0}s", notes.join("; "), start.elapsed().as_secs_f64()))
}

fn disconnected_components() -> Outcome {
    let start = Instant::now();
    let s = spec("geom{alpha=1}");
    // Paths run in the starting component; their exit positions are binned
    // into the far component.
    let component = Domain::ball(1.0, 3).unwrap();
    let union = Domain::union_of_balls(
        vec![Ball::new(vec![0.0; 3], 1.0), Ball::new(vec![5.0, 0.0, 0.0], 1.0)],
        3,
    )
    .unwrap();
    let far = Target::Ball {
        center: vec![5.0, 0.0, 0.0],
        radius: 1.0,
    };
    let v = |delta: f64| 1.0 / s.phi(delta.powi(-2)).unwrap().sqrt();
    let quad = QuadratureConfig::with_tolerance(1e-12, 1e-10);
    let target_integral = integrate(
        |rho| 4.0 * std::f64::consts::PI * rho * rho * v(1.0 - rho),
        0.0,
        1.0,
        &quad,
    )
    .unwrap()
    .value;
    let starts: [[f64; 3]; 8] = [
        [0.0, 0.0, 0.0],
        [0.5, 0.0, 0.0],
        [-0.5, 0.0, 0.0],
        [0.0, 0.5, 0.0],
        [0.0, 0.0, -0.5],
        [0.8, 0.0, 0.0],
        [-0.8, 0.0, 0.0],
        [0.3, 0.3, 0.3],
    ];
    let cfg = SimConfig {
        dt: 1e-2,
        n_paths: 100_000,
        master_seed: 13,
        ..SimConfig::default()
    };
    let mut ratios = Vec::new();
    let mut notes = Vec::new();
    for x in starts {
        let dist = estimate_exit_distribution(&s, &component, &x, &[far.clone()], &cfg)
            .map_err(|e| e.to_string())?;
        let p = dist.probabilities[0];
        let delta_x = union.delta(&x).unwrap();
        let shape = v(delta_x) * target_integral;
        if p.value <= 0.0 || p.se > 0.3 * p.value {
            return Err(format!("start {x:?}: mass {} ± {} is not resolved", p.value, p.se));
        }
        ratios.push(p.value / shape);
        notes.push(format!("{:.2e}", p.value));
    }
    let b = band(ratios.iter().copied());
    check(
        b <= 100.0,
        format!("band {b:.3}; masses [{}]; {:.0}s", notes.join(", "), start.elapsed().as_secs_f64()),
    )
}

fn bhp_decay() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new(ExperimentKind::BhpVerify, "stable{alpha=1}");
    cfg.domain = Some("ball:1".into());
    cfg.dimension = 2;
    cfg.sim.dt = 1e-3;
    cfg.sim.n_paths = 100_000;
    cfg.sim.master_seed = 17;
    cfg.sim.stepping = TimeStepping::BoundaryAdaptive {
        tolerance: 0.2,
        min_step: 1e-6,
    };
    cfg.probes.refine = true;
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let slope = report.details["slope"].as_f64().unwrap();
    let ratio = report.comparison("ratio").unwrap();
    let delta = ratio.stability_delta.unwrap();
    let elapsed = start.elapsed();
    check(
        (slope - 1.0).abs() <= 0.2 && ratio.band.is_finite() && delta <= 0.2 && within(elapsed, 600.0),
        format!(
            "slope {slope:.4}, u/v band {:.3} (Δ {delta:.3} under doubled paths); {:.0}s",
            ratio.band,
            elapsed.as_secs_f64()
        ),
    )
}

fn small_configs() -> Vec<ExperimentConfig> {
    let sim = |cfg: &mut ExperimentConfig, dt: f64, n: usize| {
        cfg.sim.dt = dt;
        cfg.sim.n_paths = n;
        cfg.sim.master_seed = 99;
    };
    let mut green = ExperimentConfig::new(ExperimentKind::GreenVerify, "geom{alpha=1}");
    green.domain = Some("ball:1".into());
    green.probes.starts = vec![vec![0.0; 3], vec![0.6, 0.0, 0.0]];
    green.probes.shells = 8;
    green.probes.refine = true;
    sim(&mut green, 2e-2, 1500);

    let mut exit = ExperimentConfig::new(ExperimentKind::ExitVerify, "stable{alpha=1}");
    exit.domain = Some("ball:1".into());
    sim(&mut exit, 1e-2, 1500);

    let mut poisson = ExperimentConfig::new(ExperimentKind::PoissonVerify, "stable{alpha=1.5}");
    poisson.domain = Some("ball:1".into());
    poisson.probes.starts = vec![vec![0.0; 3], vec![0.4, 0.0, 0.0]];
    sim(&mut poisson, 1e-2, 1500);

    let mut bhp = ExperimentConfig::new(ExperimentKind::BhpVerify, "stable{alpha=1}");
    bhp.domain = Some("ball:1".into());
    bhp.dimension = 2;
    bhp.probes.n_probes = 4;
    bhp.probes.refine = true;
    sim(&mut bhp, 1e-2, 3000);

    let condition = ExperimentConfig::new(ExperimentKind::ConditionReport, "relgeom{alpha=1,m=1}");

    let mut calibrate = ExperimentConfig::new(ExperimentKind::Calibrate, "relgeom{alpha=1,m=1}");
    calibrate.probes.draws = 5000;
    calibrate.sim.master_seed = 99;

    vec![green, exit, poisson, bhp, condition, calibrate]
}

fn artifacts(report: &ExperimentReport) -> (String, String) {
    (report.to_json().unwrap(), report.probes_csv())
}

fn determinism() -> Outcome {
    let mut notes = Vec::new();
    for cfg in small_configs() {
        let mut outputs = Vec::new();
        for threads in [1, 4, 16] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let report = pool.install(|| run_experiment(&cfg)).map_err(|e| format!("{:?}: {e}", cfg.kind))?;
            outputs.push(artifacts(&report));
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return Err(format!("{:?} differs across thread counts", cfg.kind));
        }
        notes.push(format!("{:?} ({} bytes)", cfg.kind, outputs[0].0.len() + outputs[0].1.len()));
    }
    check(true, format!("identical under 1/4/16 threads: {}", notes.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("bernstein calculus", bernstein_calculus),
        ("scaling-index recovery", scaling_indices),
        ("ladder exponent", ladder_exponent),
        ("stable closed form", stable_closed_form),
        ("sampler calibration", sampler_calibration),
        ("gamma jump kernel", gamma_jump_kernel),
        ("stable exit-time oracle", exit_time_oracle),
        ("green comparability", green_comparability),
        ("disconnected domain", disconnected_components),
        ("boundary decay", bhp_decay),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let n = k + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS [{n:2}] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{n:2}] {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
