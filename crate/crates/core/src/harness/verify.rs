use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probes whose Monte Carlo standard error exceeds this fraction of their
/// value are excluded from the band and counted.
pub const SE_EXCLUSION_FRACTION: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    TwoSided,
    /// Empirical ≤ C · shape.
    Upper,
    /// Empirical ≥ c · shape.
    Lower,
}

/// One empirical measurement at a probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeValue {
    pub probe_id: String,
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: Vec<f64>,
    pub value: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRatio {
    pub probe_id: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub empirical: f64,
    pub se: f64,
    pub shape: f64,
    pub ratio: f64,
    pub excluded: bool,
}

/// Empirical-to-shape ratios over a probe set. `band = c_upper / c_lower`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub mode: BoundMode,
    pub probes: Vec<ProbeRatio>,
    pub c_lower: f64,
    pub c_upper: f64,
    pub band: f64,
    /// The constant the mode certifies: `c_upper` for upper bounds,
    /// `c_lower` for lower bounds, `band` for two-sided ones.
    pub constant: f64,
    pub excluded: usize,
    /// Relative change of the headline statistic under refinement.
    #[serde(default)]
    pub stability_delta: Option<f64>,
}

impl ComparabilityReport {
    /// Records `|band_refined / band − 1|` (or the mode's constant) against
    /// a refined rerun.
    pub fn compare_refined(&mut self, refined: &ComparabilityReport) -> f64 {
        let delta = (refined.constant / self.constant - 1.0).abs();
        self.stability_delta = Some(delta);
        delta
    }

    pub fn included(&self) -> impl Iterator<Item = &ProbeRatio> {
        self.probes.iter().filter(|p| !p.excluded)
    }
}

/// Ratio band of `empirical / shape` over aligned probes.
pub fn verify_bound(empirical: &[ProbeValue], shape: &[f64], mode: BoundMode) -> Result<ComparabilityReport> {
    if empirical.len() != shape.len() {
        return Err(Error::Verification(format!(
            "{} empirical probes but {} shape values",
            empirical.len(),
            shape.len()
        )));
    }
    let mut probes = Vec::with_capacity(empirical.len());
    for (e, &s) in empirical.iter().zip(shape) {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Verification(format!(
                "probe {} has non-positive shape {s}",
                e.probe_id
            )));
        }
        let excluded = !(e.value > 0.0) || e.se > SE_EXCLUSION_FRACTION * e.value;
        probes.push(ProbeRatio {
            probe_id: e.probe_id.clone(),
            x: e.x.clone(),
            y: e.y.clone(),
            empirical: e.value,
            se: e.se,
            shape: s,
            ratio: e.value / s,
            excluded,
        });
    }
    let excluded = probes.iter().filter(|p| p.excluded).count();
    let kept: Vec<f64> = probes.iter().filter(|p| !p.excluded).map(|p| p.ratio).collect();
    if kept.is_empty() {
        return Err(Error::Verification(format!(
            "all {} probes were excluded by the standard-error rule",
            probes.len()
        )));
    }
    let c_lower = kept.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_upper = kept.iter().cloned().fold(0.0, f64::max);
    let band = c_upper / c_lower;
    let constant = match mode {
        BoundMode::TwoSided => band,
        BoundMode::Upper => c_upper,
        BoundMode::Lower => c_lower,
    };
    Ok(ComparabilityReport {
        mode,
        probes,
        c_lower,
        c_upper,
        band,
        constant,
        excluded,
        stability_delta: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes(values: &[(f64, f64)]) -> Vec<ProbeValue> {
        values
            .iter()
            .enumerate()
            .map(|(i, &(value, se))| ProbeValue {
                probe_id: format!("p{i}"),
                x: vec![i as f64],
                y: vec![],
                value,
                se,
            })
            .collect()
    }

    #[test]
    fn exact_match_has_unit_band() {
        let shape = [1.0, 2.0, 5.0];
        let emp = probes(&[(1.0, 0.0), (2.0, 0.0), (5.0, 0.0)]);
        let r = verify_bound(&emp, &shape, BoundMode::TwoSided).unwrap();
        assert_eq!(r.band, 1.0);
        assert_eq!(r.excluded, 0);
    }

    #[test]
    fn constant_scaling() {
        let shape = [1.0, 2.0, 5.0];
        let emp = probes(&[(3.0, 0.0), (6.0, 0.0), (15.0, 0.0)]);
        let r = verify_bound(&emp, &shape, BoundMode::Upper).unwrap();
        assert_eq!((r.c_lower, r.c_upper, r.band, r.constant), (3.0, 3.0, 1.0, 3.0));
    }

    #[test]
    fn mixed_ratios() {
        let r = verify_bound(&probes(&[(2.0, 0.1), (8.0, 0.1)]), &[1.0, 1.0], BoundMode::TwoSided).unwrap();
        assert_eq!(r.band, 4.0);
        let lower = verify_bound(&probes(&[(2.0, 0.1), (8.0, 0.1)]), &[1.0, 1.0], BoundMode::Lower).unwrap();
        assert_eq!(lower.constant, 2.0);
    }

    #[test]
    fn noisy_probes_are_excluded_and_counted() {
        let emp = probes(&[(1.0, 0.1), (1.0, 0.5), (0.0, 0.0), (2.0, 0.2)]);
        let r = verify_bound(&emp, &[1.0; 4], BoundMode::TwoSided).unwrap();
        assert_eq!(r.excluded, 2);
        assert_eq!(r.band, 2.0);
        let all_bad = probes(&[(1.0, 0.9)]);
        assert!(verify_bound(&all_bad, &[1.0], BoundMode::TwoSided).is_err());
        assert!(verify_bound(&emp, &[1.0], BoundMode::TwoSided).is_err());
    }

    #[test]
    fn refinement_delta() {
        let mut a = verify_bound(&probes(&[(2.0, 0.1), (8.0, 0.1)]), &[1.0, 1.0], BoundMode::TwoSided).unwrap();
        let b = verify_bound(&probes(&[(2.0, 0.1), (9.0, 0.1)]), &[1.0, 1.0], BoundMode::TwoSided).unwrap();
        let delta = a.compare_refined(&b);
        assert!((delta - 0.125).abs() < 1e-15);
        assert_eq!(a.stability_delta, Some(delta));
    }
}
