use sbm_core::bernstein::{
    check_a3, green_proxy, ladder_exponent_kappa, log_grid, LaplaceExponentSpec, ScalingWindow,
};
use sbm_core::quadrature::QuadratureConfig;

fn families() -> Vec<LaplaceExponentSpec> {
    vec![
        LaplaceExponentSpec::stable(0.5).unwrap(),
        LaplaceExponentSpec::stable(1.0).unwrap(),
        LaplaceExponentSpec::stable(1.5).unwrap(),
        LaplaceExponentSpec::geometric_stable(1.0).unwrap(),
        LaplaceExponentSpec::geometric_stable(2.0).unwrap(),
        LaplaceExponentSpec::iterated_geometric_stable(1.0, 2).unwrap(),
        LaplaceExponentSpec::iterated_geometric_stable(1.5, 4).unwrap(),
        LaplaceExponentSpec::relativistic_geometric_stable(1.0, 1.0).unwrap(),
        LaplaceExponentSpec::relativistic_geometric_stable(0.6, 3.0).unwrap(),
        LaplaceExponentSpec::gamma(),
    ]
}

#[test]
fn log_derivative_never_exceeds_one() {
    let grid = log_grid(1e-6, 1e6, 100_000);
    for spec in families() {
        for &l in &grid {
            let (phi, dphi) = (spec.phi(l).unwrap(), spec.phi_prime(l).unwrap());
            assert!(l * dphi <= phi * (1.0 + 1e-9), "{spec} at {l}");
        }
    }
}

#[test]
fn sublinear_growth() {
    let ts = log_grid(1e-4, 1e4, 60);
    let factors = log_grid(1.0, 1e3, 30);
    for spec in families() {
        for &t in &ts {
            let base = spec.phi(t).unwrap();
            for &l in &factors {
                assert!(spec.phi(t * l).unwrap() <= l * base * (1.0 + 1e-12), "{spec} t={t} l={l}");
            }
        }
    }
}

#[test]
fn eta_functions_are_nondecreasing() {
    let grid = log_grid(1e-6, 1e6, 10_000);
    for spec in families() {
        let mut prev: Option<(f64, f64)> = None;
        for &l in &grid {
            let (phi, dphi) = (spec.phi(l).unwrap(), spec.phi_prime(l).unwrap());
            let eta1 = l * l * dphi;
            let eta2 = eta1 / (phi * phi);
            if let Some((p1, p2)) = prev {
                assert!(eta1 >= p1 * (1.0 - 1e-10), "{spec} eta1 at {l}");
                assert!(eta2 >= p2 * (1.0 - 1e-10), "{spec} eta2 at {l}");
            }
            prev = Some((eta1, eta2));
        }
    }
}

#[test]
fn green_proxy_sandwich_on_dyadic_neighbourhoods() {
    let (a, b) = (2.0f64, 0.5f64);
    for d in 1..=3usize {
        let lo = b * a.powi(-(d as i32) - 3);
        let hi = a * b.powi(-(d as i32) - 3);
        for spec in families() {
            for &lam in &log_grid(1e-3, 0.5, 30) {
                let centre = green_proxy(&spec, lam, d).unwrap();
                for &t in &log_grid(lam / 2.0, 2.0 * lam, 9) {
                    let ratio = green_proxy(&spec, t, d).unwrap() / centre;
                    assert!(ratio >= lo && ratio <= hi, "{spec} d={d} λ={lam} t={t}: {ratio}");
                }
            }
        }
    }
}

#[test]
fn upper_growth_with_slack() {
    let window = ScalingWindow::default();
    let xs = log_grid(1.0, 1e4, 40);
    for spec in families() {
        let delta = check_a3(&spec, &window).delta_hat.unwrap();
        for eps in [0.1, 0.25] {
            let mut c: f64 = 0.0;
            for &l in &log_grid(1.0, 1e6, 40) {
                let base = spec.phi(l).unwrap();
                for &x in &xs {
                    c = c.max(spec.phi(l * x).unwrap() / base / x.powf(1.0 - delta + eps));
                }
            }
            assert!(c.is_finite() && c < 10.0, "{spec} ε={eps}: c = {c}");
        }
    }
}

#[test]
fn ladder_exponent_tracks_root_of_phi() {
    let cfg = QuadratureConfig::default();
    for spec in families() {
        let ratios: Vec<f64> = log_grid(1e-2, 1e6, 25)
            .into_iter()
            .map(|l| ladder_exponent_kappa(&spec, l, &cfg).unwrap() / spec.phi(l * l).unwrap().sqrt())
            .collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 10.0, "{spec}: [{lo}, {hi}]");
    }
}
