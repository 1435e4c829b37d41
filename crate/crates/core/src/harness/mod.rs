//! Experiment orchestration: configuration, empirical comparability
//! constants, and report emission.
//!
//! A report is a pure function of its configuration. Simulation streams are
//! keyed by path index, so neither the worker count nor scheduling order can
//! change a single byte of `report.json` or `probes.csv`.

mod experiments;
mod shell;
mod verify;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bernstein::LaplaceExponentSpec;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::simulate::{SimConfig, Target};

pub use experiments::{bhp_experiment, BhpProbe, BhpReport, BhpSetup};
pub use shell::shell_green_integral;
pub use verify::{
    verify_bound, BoundMode, ComparabilityReport, ProbeRatio, ProbeValue, SE_EXCLUSION_FRACTION,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Build identifier baked in at compile time (`git describe` when available).
pub const BUILD_ID: &str = env!("SBM_BUILD_ID");

pub const PROBES_HEADER: &str = "probe_id,x,y,empirical,se,shape,ratio";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GreenVerify,
    ExitVerify,
    PoissonVerify,
    BhpVerify,
    ConditionReport,
    Calibrate,
}

impl ExperimentKind {
    pub fn needs_domain(self) -> bool {
        !matches!(self, ExperimentKind::ConditionReport | ExperimentKind::Calibrate)
    }
}

/// Where and what to probe. Each experiment reads the fields it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Start points; empty means the origin.
    pub starts: Vec<Vec<f64>>,
    /// Equal-volume shells per component for green-verify.
    pub shells: usize,
    /// Rerun with twice the paths on the next master seed (and half the
    /// step for green-verify) and record the stability delta.
    pub refine: bool,
    /// Fine step for exit-time extrapolation; `dt / 2` when absent.
    pub fine_dt: Option<f64>,
    /// Order `p` of the `dt^p` discretization error.
    pub richardson_order: f64,
    /// Radii `R + offset` bounding the exterior shells of poisson-verify.
    pub exterior_offsets: Vec<f64>,
    /// bhp-verify boundary point; `(R, 0, …, 0)` on a ball when absent.
    pub boundary_point: Option<Vec<f64>>,
    pub inward_normal: Option<Vec<f64>>,
    pub radius: f64,
    pub n_probes: usize,
    /// Exterior sets defining the two harmonic functions of bhp-verify.
    pub targets: Option<(Target, Target)>,
    /// Clock values for calibrate.
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub draws: usize,
    /// Base-point window for condition-report.
    pub window_min: f64,
    pub window_max: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            starts: Vec::new(),
            shells: crate::simulate::DEFAULT_SHELLS,
            refine: false,
            fine_dt: None,
            richardson_order: 1.0,
            exterior_offsets: vec![0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2],
            boundary_point: None,
            inward_normal: None,
            radius: 0.25,
            n_probes: 8,
            targets: None,
            times: vec![0.5, 1.0, 2.0],
            lambdas: vec![0.5, 1.0, 4.0],
            draws: 100_000,
            window_min: 1.0,
            window_max: 1e6,
        }
    }
}

/// Hard-assertion limits. These are engineering choices: the underlying
/// bounds only assert that finite constants exist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub band_ceiling: f64,
    /// Largest admissible relative change of the headline statistic under
    /// refinement.
    pub stability: f64,
    /// Most probes per start that the standard-error rule may drop.
    pub max_excluded: usize,
    pub slope_tolerance: f64,
    pub z_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            band_ceiling: 100.0,
            stability: 0.2,
            max_excluded: 4,
            slope_tolerance: 0.2,
            z_max: 3.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Family id such as `stable{alpha=1}`.
    pub family: String,
    /// Domain literal such as `ball:1`.
    #[serde(default)]
    pub domain: Option<String>,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_dimension() -> usize {
    3
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, family: &str) -> Self {
        Self {
            kind,
            family: family.to_string(),
            domain: None,
            dimension: default_dimension(),
            sim: SimConfig::default(),
            probes: ProbeConfig::default(),
            thresholds: Thresholds::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn spec(&self) -> Result<LaplaceExponentSpec> {
        self.family.parse()
    }

    pub fn domain(&self) -> Result<Domain> {
        let literal = self
            .domain
            .as_deref()
            .ok_or_else(|| Error::Config(format!("{:?} needs a domain", self.kind)))?;
        Domain::parse(literal, self.dimension)
    }

    /// Start points, defaulting to the origin.
    pub fn starts(&self) -> Result<Vec<Vec<f64>>> {
        if self.probes.starts.is_empty() {
            return Ok(vec![vec![0.0; self.dimension]]);
        }
        for s in &self.probes.starts {
            if s.len() != self.dimension {
                return Err(Error::Config(format!(
                    "start point {s:?} does not have dimension {}",
                    self.dimension
                )));
            }
        }
        Ok(self.probes.starts.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.spec().map_err(|e| e.context("family"))?;
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.kind.needs_domain() {
            self.domain().map_err(|e| e.context("domain"))?;
            self.sim.validate()?;
        }
        self.starts()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub build_id: String,
    pub versions: BTreeMap<String, String>,
    pub config: ExperimentConfig,
    /// The configuration in canonical TOML form.
    pub config_toml: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    /// Named comparability reports, in emission order.
    pub comparisons: Vec<(String, ComparabilityReport)>,
    /// Experiment-specific data.
    pub details: serde_json::Value,
}

impl ExperimentReport {
    pub fn comparison(&self, name: &str) -> Option<&ComparabilityReport> {
        self.comparisons.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// `probes.csv`: every probe of every comparison, with the comparison
    /// name prefixed to its id and coordinates joined by `;`.
    pub fn probes_csv(&self) -> String {
        let mut out = String::from(PROBES_HEADER);
        out.push('\n');
        let point = |p: &[f64]| p.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        for (name, report) in &self.comparisons {
            for p in &report.probes {
                let _ = writeln!(
                    out,
                    "{name}/{},{},{},{},{},{},{}",
                    p.probe_id,
                    point(&p.x),
                    point(&p.y),
                    p.empirical,
                    p.se,
                    p.shape,
                    p.ratio
                );
            }
        }
        out
    }
}

/// Outcome of an experiment before it is wrapped into a report.
pub(crate) struct Outcome {
    pub assertions: Vec<Assertion>,
    pub comparisons: Vec<(String, ComparabilityReport)>,
    pub details: serde_json::Value,
}

fn versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION").to_string();
    ["sbm-core", "bernstein", "geometry", "estimates", "simulate", "harness"]
        .into_iter()
        .map(|m| (m.to_string(), v.clone()))
        .collect()
}

/// Runs the configured experiment. Parallelism comes from the ambient rayon
/// pool; the result does not depend on it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let outcome = match cfg.kind {
        ExperimentKind::GreenVerify => experiments::green_verify(cfg),
        ExperimentKind::ExitVerify => experiments::exit_verify(cfg),
        ExperimentKind::PoissonVerify => experiments::poisson_verify(cfg),
        ExperimentKind::BhpVerify => experiments::bhp_verify(cfg),
        ExperimentKind::ConditionReport => experiments::condition_report(cfg),
        ExperimentKind::Calibrate => experiments::calibrate(cfg),
    }?;
    let passed = outcome.assertions.iter().all(|a| a.passed);
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        build_id: BUILD_ID.to_string(),
        versions: versions(),
        config: cfg.clone(),
        config_toml: cfg.to_toml_string()?,
        passed,
        assertions: outcome.assertions,
        comparisons: outcome.comparisons,
        details: outcome.details,
    })
}

/// Writes `report.json` and `probes.csv` into `dir`, creating it if needed.
pub fn write_artifacts(report: &ExperimentReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let json = dir.join("report.json");
    let csv = dir.join("probes.csv");
    fs::write(&json, report.to_json()?)
        .map_err(|e| Error::from(e).context(format!("writing {}", json.display())))?;
    fs::write(&csv, report.probes_csv())
        .map_err(|e| Error::from(e).context(format!("writing {}", csv.display())))?;
    Ok((json, csv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let text = r#"
            kind = "green-verify"
            family = "stable{alpha=1}"
            domain = "ball:1"
            dimension = 3

            [sim]
            dt = 0.002
            n_paths = 1000
            master_seed = 7

            [probes]
            starts = [[0.0, 0.0, 0.0], [0.6, 0.0, 0.0]]
            refine = true

            [thresholds]
            band_ceiling = 50.0
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::GreenVerify);
        assert_eq!(cfg.sim.n_paths, 1000);
        assert_eq!(cfg.sim.max_steps, SimConfig::default().max_steps);
        assert_eq!(cfg.probes.shells, 16);
        assert_eq!(cfg.thresholds.band_ceiling, 50.0);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn malformed_domain_names_the_token() {
        let text = "kind = \"exit-verify\"\nfamily = \"stable{1}\"\ndomain = \"bal:1\"\n";
        let err = ExperimentConfig::from_toml_str(text).unwrap_err().to_string();
        assert!(err.contains("bal"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "kind = \"calibrate\"\nfamily = \"gamma\"\n[sim]\nn_path = 3\n";
        assert!(ExperimentConfig::from_toml_str(text).is_err());
        let bad_kind = "kind = \"green\"\nfamily = \"gamma\"\n";
        assert!(ExperimentConfig::from_toml_str(bad_kind).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let cmp = verify_bound(
            &[ProbeValue {
                probe_id: "p0".into(),
                x: vec![0.5, 0.0],
                y: vec![],
                value: 2.0,
                se: 0.1,
            }],
            &[1.0],
            BoundMode::Upper,
        )
        .unwrap();
        let report = ExperimentReport {
            schema_version: SCHEMA_VERSION,
            build_id: BUILD_ID.into(),
            versions: versions(),
            config: ExperimentConfig::new(ExperimentKind::Calibrate, "gamma"),
            config_toml: String::new(),
            passed: true,
            assertions: vec![],
            comparisons: vec![("upper".into(), cmp)],
            details: serde_json::Value::Null,
        };
        let csv = report.probes_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(PROBES_HEADER));
        assert_eq!(lines.next(), Some("upper/p0,0.5;0,,2,0.1,1,2"));
        assert!(!BUILD_ID.is_empty());
    }
}
