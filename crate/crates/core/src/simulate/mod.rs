//! Monte Carlo for the killed process `X_t = W_{S_t}`.
//!
//! Paths are walked on a time grid: each step draws a subordinator increment
//! `ΔS` and a centred Gaussian displacement with per-coordinate variance
//! `2ΔS` (so that `E e^{iθ·W_t} = e^{−t|θ|²}`). A path is killed at the first
//! grid time whose position lies outside the region.
//!
//! Path `i` draws from its own ChaCha stream keyed by `(master_seed, i)`, and
//! work is split into fixed-size chunks whose results are combined in chunk
//! order, so every estimate is independent of the thread count.

mod cells;
mod sampler;

pub use cells::{Cell, OccupationGrid, DEFAULT_SHELLS};
pub use sampler::{
    sample_gamma, sample_geometric_stable_increment, sample_relativistic_geometric_increment,
    sample_stable_increment, sample_tilted_stable, SubordinatorSampler,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::LaplaceExponentSpec;
use crate::error::{Error, Result};
use crate::geometry::{dist, Ball, Domain, Shape};

const CHUNK: usize = 256;

/// Bits reserved for the path index inside a stream id; higher bits carry a
/// caller-chosen offset such as a probe index.
const PATH_BITS: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeStepping {
    /// Every step has length `dt`.
    #[default]
    Uniform,
    /// Step `clamp(1/φ((ε δ)⁻²), min_step, dt)` at distance `δ` from the
    /// boundary: the step shrinks until the typical displacement is a
    /// fraction `ε` of the distance to the boundary.
    BoundaryAdaptive { tolerance: f64, min_step: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub max_steps: u64,
    pub n_paths: usize,
    pub master_seed: u64,
    /// Lateral half-width at which slab paths are killed.
    pub lateral_truncation: Option<f64>,
    pub stepping: TimeStepping,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            max_steps: 1_000_000,
            n_paths: 10_000,
            master_seed: 0,
            lateral_truncation: None,
            stepping: TimeStepping::Uniform,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
        }
        if self.n_paths as u64 >= 1 << PATH_BITS {
            return Err(Error::InvalidParameter(format!("n_paths = {} is too large", self.n_paths)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
        }
        if let Some(w) = self.lateral_truncation {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("lateral truncation {w} must be positive")));
            }
        }
        if let TimeStepping::BoundaryAdaptive { tolerance, min_step } = self.stepping {
            if !(tolerance > 0.0 && min_step > 0.0 && min_step <= self.dt) {
                return Err(Error::InvalidParameter(format!(
                    "adaptive stepping needs tolerance > 0 and 0 < min_step ≤ dt, got {tolerance}, {min_step}"
                )));
            }
        }
        Ok(())
    }

    fn step(&self, spec: &LaplaceExponentSpec, delta: f64) -> f64 {
        match self.stepping {
            TimeStepping::Uniform => self.dt,
            TimeStepping::BoundaryAdaptive { tolerance, min_step } => {
                let (ln_phi, _) = spec.ln_phi_and_prime(-2.0 * (tolerance * delta).ln());
                (-ln_phi).exp().clamp(min_step, self.dt)
            }
        }
    }
}

/// The set in which paths live: a domain, optionally intersected with a ball
/// window, with slabs truncated laterally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillingRegion {
    pub domain: Domain,
    #[serde(default)]
    pub window: Option<Ball>,
    #[serde(default)]
    pub lateral: Option<f64>,
}

impl KillingRegion {
    pub fn new(domain: Domain, cfg: &SimConfig) -> Result<Self> {
        let lateral = match domain.shape {
            Shape::HalfSpaceSlab { .. } => Some(cfg.lateral_truncation.ok_or_else(|| {
                Error::Simulation("slab simulation needs a lateral truncation".into())
            })?),
            _ => None,
        };
        Ok(Self {
            domain,
            window: None,
            lateral,
        })
    }

    pub fn with_window(mut self, window: Ball) -> Result<Self> {
        if window.center.len() != self.domain.dimension {
            return Err(Error::Geometry("window dimension does not match domain".into()));
        }
        self.window = Some(window);
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension
    }

    fn lateral_depth(&self, x: &[f64]) -> f64 {
        match self.lateral {
            Some(w) => {
                let d = x.len();
                w - x[..d - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
            None => f64::INFINITY,
        }
    }

    /// Distance to the complement of the region; zero outside.
    pub fn delta(&self, x: &[f64]) -> f64 {
        let mut d = self.domain.dist_to_complement(x);
        if let Some(b) = &self.window {
            d = d.min(b.radius - dist(x, &b.center));
        }
        d.min(self.lateral_depth(x)).max(0.0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.delta(x) > 0.0
    }

    /// Whether a killed position is still in the domain but outside the
    /// lateral truncation.
    fn is_lateral_exit(&self, x: &[f64]) -> bool {
        self.lateral.is_some() && self.domain.contains(x) && self.lateral_depth(x) <= 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    /// Grid time of the first exterior observation, or of the last step when
    /// censored.
    pub exit_time: f64,
    pub exit_position: Vec<f64>,
    pub path_index: u64,
    pub censored: bool,
    /// Killed by the lateral truncation of a slab rather than by its faces.
    #[serde(default)]
    pub lateral_exit: bool,
}

/// Per-path random stream.
pub fn path_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

fn run_path<R: Rng + ?Sized>(
    spec: &LaplaceExponentSpec,
    sampler: &SubordinatorSampler,
    region: &KillingRegion,
    x0: &[f64],
    cfg: &SimConfig,
    rng: &mut R,
    path_index: u64,
    mut occupation: Option<(&OccupationGrid, &mut [f64])>,
) -> Result<ExitRecord> {
    let mut x = x0.to_vec();
    let mut delta = region.delta(&x);
    let mut t = 0.0;
    for _ in 0..cfg.max_steps {
        let h = cfg.step(spec, delta);
        if let Some((grid, occ)) = occupation.as_mut() {
            if let Some(c) = grid.locate(&x) {
                occ[c] += h;
            }
        }
        let ds = sampler.sample(h, rng)?;
        let mut sd = (2.0 * ds).sqrt();
        if !sd.is_finite() {
            // Only reachable when ΔS overflows a double; the direction is
            // kept and the path certainly leaves any bounded region.
            sd = f64::MAX.sqrt();
        }
        for xi in x.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *xi += sd * z;
        }
        t += h;
        delta = region.delta(&x);
        if delta <= 0.0 {
            let lateral_exit = region.is_lateral_exit(&x);
            return Ok(ExitRecord {
                exit_time: t,
                exit_position: x,
                path_index,
                censored: false,
                lateral_exit,
            });
        }
    }
    Ok(ExitRecord {
        exit_time: t,
        exit_position: x,
        path_index,
        censored: true,
        lateral_exit: false,
    })
}

fn check_start(region: &KillingRegion, x0: &[f64]) -> Result<()> {
    if x0.len() != region.dimension() {
        return Err(Error::Simulation(format!(
            "start point has {} coordinates, region dimension is {}",
            x0.len(),
            region.dimension()
        )));
    }
    if !region.contains(x0) {
        return Err(Error::Simulation(format!("start point {x0:?} is not inside the region")));
    }
    Ok(())
}

/// One killed path from `x0`, using stream `path_index` of `cfg.master_seed`.
pub fn simulate_killed_path(
    spec: &LaplaceExponentSpec,
    dom: &Domain,
    x0: &[f64],
    cfg: &SimConfig,
    path_index: u64,
) -> Result<ExitRecord> {
    cfg.validate()?;
    let region = KillingRegion::new(dom.clone(), cfg)?;
    check_start(&region, x0)?;
    let sampler = SubordinatorSampler::new(spec)?;
    let mut rng = path_rng(cfg.master_seed, path_index);
    run_path(spec, &sampler, &region, x0, cfg, &mut rng, path_index, None)
}

/// Per-cell first and second moments of per-path occupation time.
#[derive(Clone, Debug, PartialEq, Default)]
struct OccupationSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl OccupationSums {
    fn zeros(n: usize) -> Self {
        Self {
            sum: vec![0.0; n],
            sum_sq: vec![0.0; n],
        }
    }

    fn absorb(&mut self, other: &Self) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
    }
}

/// Exit records of `n_paths` paths, in path order.
#[derive(Clone, Debug)]
pub struct PathBatch {
    pub records: Vec<ExitRecord>,
    occupation: Option<OccupationSums>,
}

impl PathBatch {
    pub fn censored(&self) -> usize {
        self.records.iter().filter(|r| r.censored).count()
    }

    pub fn lateral_exits(&self) -> usize {
        self.records.iter().filter(|r| r.lateral_exit).count()
    }
}

/// Runs `cfg.n_paths` paths from `x0` on streams `offset·2⁴⁰ + i`.
pub fn simulate_paths(
    spec: &LaplaceExponentSpec,
    region: &KillingRegion,
    x0: &[f64],
    cfg: &SimConfig,
    grid: Option<&OccupationGrid>,
    stream_offset: u64,
) -> Result<PathBatch> {
    cfg.validate()?;
    check_start(region, x0)?;
    let sampler = SubordinatorSampler::new(spec)?;
    let n = cfg.n_paths;
    let n_chunks = n.div_ceil(CHUNK);
    let base = stream_offset << PATH_BITS;
    let chunks: Vec<(Vec<ExitRecord>, Option<OccupationSums>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut records = Vec::with_capacity(end - start);
            let mut sums = grid.map(|g| OccupationSums::zeros(g.len()));
            let mut occ = grid.map(|g| vec![0.0; g.len()]);
            for i in start..end {
                let stream = base | i as u64;
                let mut rng = path_rng(cfg.master_seed, stream);
                let occ_arg = match (grid, occ.as_mut()) {
                    (Some(g), Some(o)) => {
                        o.iter_mut().for_each(|v| *v = 0.0);
                        Some((g, o.as_mut_slice()))
                    }
                    _ => None,
                };
                let rec = run_path(spec, &sampler, region, x0, cfg, &mut rng, i as u64, occ_arg)?;
                if let (Some(s), Some(o)) = (sums.as_mut(), occ.as_ref()) {
                    for (k, &v) in o.iter().enumerate() {
                        s.sum[k] += v;
                        s.sum_sq[k] += v * v;
                    }
                }
                records.push(rec);
            }
            Ok((records, sums))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(n);
    let mut occupation = grid.map(|g| OccupationSums::zeros(g.len()));
    for (recs, sums) in chunks {
        records.extend(recs);
        if let (Some(total), Some(s)) = (occupation.as_mut(), sums.as_ref()) {
            total.absorb(s);
        }
    }
    let batch = PathBatch { records, occupation };
    let lateral = batch.lateral_exits();
    if lateral > 0 {
        log::warn!(
            "{lateral} of {n} paths were killed by the lateral truncation at {:?}",
            region.lateral
        );
    }
    Ok(batch)
}

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> McEstimate {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let var = if n > 1 {
        values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    McEstimate {
        value: mean,
        se: (var / nf).sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeEstimate {
    pub mean: f64,
    pub se: f64,
    pub dt: f64,
    pub paths: usize,
    pub censored: usize,
    pub censored_fraction: f64,
    /// More than half of the paths were censored.
    pub censoring_flagged: bool,
}

/// Mean exit time over uncensored paths.
pub fn estimate_mean_exit_time(
    spec: &LaplaceExponentSpec,
    dom: &Domain,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<ExitTimeEstimate> {
    let region = KillingRegion::new(dom.clone(), cfg)?;
    let batch = simulate_paths(spec, &region, x0, cfg, None, 0)?;
    exit_time_from_batch(&batch, cfg)
}

fn exit_time_from_batch(batch: &PathBatch, cfg: &SimConfig) -> Result<ExitTimeEstimate> {
    let censored = batch.censored();
    let done = batch.records.len() - censored;
    if done == 0 {
        return Err(Error::Simulation("every path was censored".into()));
    }
    let times = batch.records.iter().filter(|r| !r.censored).map(|r| r.exit_time);
    let est = mean_and_se(times, done);
    let frac = censored as f64 / batch.records.len() as f64;
    Ok(ExitTimeEstimate {
        mean: est.value,
        se: est.se,
        dt: cfg.dt,
        paths: batch.records.len(),
        censored,
        censored_fraction: frac,
        censoring_flagged: frac > 0.5,
    })
}

/// Richardson extrapolation in the step size for an error `∝ dt^order`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RichardsonEstimate {
    pub coarse: ExitTimeEstimate,
    pub fine: ExitTimeEstimate,
    pub order: f64,
    pub value: f64,
    pub se: f64,
}

pub fn richardson_exit_time(
    spec: &LaplaceExponentSpec,
    dom: &Domain,
    x0: &[f64],
    cfg: &SimConfig,
    coarse_dt: f64,
    fine_dt: f64,
    order: f64,
) -> Result<RichardsonEstimate> {
    if !(fine_dt < coarse_dt && order > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need fine dt < coarse dt and order > 0, got {fine_dt}, {coarse_dt}, {order}"
        )));
    }
    let coarse = estimate_mean_exit_time(spec, dom, x0, &SimConfig { dt: coarse_dt, ..cfg.clone() })?;
    let fine = estimate_mean_exit_time(spec, dom, x0, &SimConfig { dt: fine_dt, ..cfg.clone() })?;
    let q = (coarse_dt / fine_dt).powf(order);
    let value = (q * fine.mean - coarse.mean) / (q - 1.0);
    let se = (q * q * fine.se * fine.se + coarse.se * coarse.se).sqrt() / (q - 1.0);
    Ok(RichardsonEstimate {
        coarse,
        fine,
        order,
        value,
        se,
    })
}

/// Exterior target set for exit-distribution estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// Open ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : inner ≤ |x − center| < outer}`.
    Shell { center: Vec<f64>, inner: f64, outer: f64 },
    /// `{x : x·normal ≥ offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// Every exit position.
    Anywhere,
}

impl Target {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Target::Ball { center, radius } => dist(x, center) < *radius,
            Target::Shell { center, inner, outer } => {
                let rho = dist(x, center);
                rho >= *inner && rho < *outer
            }
            Target::HalfSpace { normal, offset } => {
                x.iter().zip(normal).map(|(a, b)| a * b).sum::<f64>() >= *offset
            }
            Target::Anywhere => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitDistribution {
    pub x0: Vec<f64>,
    /// `P(X_τ ∈ target)` per target, over all paths; censored paths count as
    /// hitting no target.
    pub probabilities: Vec<McEstimate>,
    pub hits: Vec<usize>,
    pub paths: usize,
    pub censored: usize,
}

fn distribution_from_batch(batch: &PathBatch, x0: &[f64], targets: &[Target]) -> Result<ExitDistribution> {
    let n = batch.records.len();
    let censored = batch.censored();
    if censored == n {
        return Err(Error::Simulation("every path was censored".into()));
    }
    let mut probabilities = Vec::with_capacity(targets.len());
    let mut hits = Vec::with_capacity(targets.len());
    for target in targets {
        let k = batch
            .records
            .iter()
            .filter(|r| !r.censored && target.contains(&r.exit_position))
            .count();
        let p = k as f64 / n as f64;
        let se = if n > 1 {
            (p * (1.0 - p) / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        probabilities.push(McEstimate { value: p, se });
        hits.push(k);
    }
    Ok(ExitDistribution {
        x0: x0.to_vec(),
        probabilities,
        hits,
        paths: n,
        censored,
    })
}

/// Exit probabilities into each target.
pub fn estimate_exit_distribution(
    spec: &LaplaceExponentSpec,
    dom: &Domain,
    x0: &[f64],
    targets: &[Target],
    cfg: &SimConfig,
) -> Result<ExitDistribution> {
    let region = KillingRegion::new(dom.clone(), cfg)?;
    let batch = simulate_paths(spec, &region, x0, cfg, None, 0)?;
    distribution_from_batch(&batch, x0, targets)
}

/// `u(x) = P_x(X_τ ∈ A)` for each start point and target, with start point
/// `k` drawing from stream block `k`.
pub fn estimate_harmonic(
    spec: &LaplaceExponentSpec,
    region: &KillingRegion,
    starts: &[Vec<f64>],
    targets: &[Target],
    cfg: &SimConfig,
) -> Result<Vec<ExitDistribution>> {
    starts
        .iter()
        .enumerate()
        .map(|(k, x0)| {
            let batch = simulate_paths(spec, region, x0, cfg, None, k as u64)?;
            distribution_from_batch(&batch, x0, targets)
                .map_err(|e| e.context(format!("start point {k} at {x0:?}")))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOccupation {
    pub cell: Cell,
    /// Mean occupation time per unit volume.
    pub density: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationEstimate {
    pub cells: Vec<CellOccupation>,
    pub paths: usize,
    /// Censored paths contribute their occupation up to censoring.
    pub censored: usize,
    pub mean_exit_time: f64,
}

/// Mean occupation density per cell, an estimate of `∫_cell G_D(x0, y) dy`
/// divided by the cell volume.
pub fn estimate_occupation(
    spec: &LaplaceExponentSpec,
    dom: &Domain,
    x0: &[f64],
    grid: &OccupationGrid,
    cfg: &SimConfig,
) -> Result<OccupationEstimate> {
    let region = KillingRegion::new(dom.clone(), cfg)?;
    let batch = simulate_paths(spec, &region, x0, cfg, Some(grid), 0)?;
    let sums = batch.occupation.as_ref().expect("grid was supplied");
    let n = batch.records.len() as f64;
    let cells = grid
        .cells()
        .iter()
        .enumerate()
        .map(|(k, cell)| {
            let mean = sums.sum[k] / n;
            let var = ((sums.sum_sq[k] - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
            CellOccupation {
                cell: cell.clone(),
                density: mean / cell.volume,
                se: (var / n).sqrt() / cell.volume,
            }
        })
        .collect();
    let mean_exit_time = batch.records.iter().map(|r| r.exit_time).sum::<f64>() / n;
    Ok(OccupationEstimate {
        cells,
        paths: batch.records.len(),
        censored: batch.censored(),
        mean_exit_time,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceCalibration {
    pub t: f64,
    pub lambda: f64,
    pub empirical: f64,
    pub se: f64,
    pub exact: f64,
}

impl LaplaceCalibration {
    /// `|empirical − exact|` in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.empirical - self.exact).abs() / self.se
    }
}

/// Compares `E e^{−λS_t}` over `n` increments with `e^{−tφ(λ)}`.
pub fn calibrate_sampler(
    spec: &LaplaceExponentSpec,
    t: f64,
    lambdas: &[f64],
    n: usize,
    master_seed: u64,
) -> Result<Vec<LaplaceCalibration>> {
    if n < 2 {
        return Err(Error::InvalidParameter("calibration needs at least two draws".into()));
    }
    let sampler = SubordinatorSampler::new(spec)?;
    let n_chunks = n.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            (start..end)
                .map(|i| sampler.sample(t, &mut path_rng(master_seed, i as u64)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let draws: Vec<f64> = chunks.into_iter().flatten().collect();
    lambdas
        .iter()
        .map(|&lambda| {
            let est = mean_and_se(draws.iter().map(|s| (-lambda * s).exp()), n);
            Ok(LaplaceCalibration {
                t,
                lambda,
                empirical: est.value,
                se: est.se,
                exact: (-t * spec.phi(lambda)?).exp(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stable1() -> LaplaceExponentSpec {
        LaplaceExponentSpec::stable(1.0).unwrap()
    }

    fn cfg(dt: f64, n: usize, seed: u64) -> SimConfig {
        SimConfig {
            dt,
            n_paths: n,
            master_seed: seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn start_outside_is_rejected() {
        let dom = Domain::ball(1.0, 3).unwrap();
        let err = simulate_killed_path(&stable1(), &dom, &[1.0, 0.0, 0.0], &cfg(1e-2, 1, 0), 0);
        assert!(err.is_err());
    }

    #[test]
    fn exits_lie_outside_and_occupation_matches_exit_time() {
        let dom = Domain::ball(1.0, 3).unwrap();
        let c = cfg(1e-2, 2000, 1);
        let region = KillingRegion::new(dom.clone(), &c).unwrap();
        let grid = OccupationGrid::radial(&dom, 16, None).unwrap();
        let batch = simulate_paths(&stable1(), &region, &[0.0; 3], &c, Some(&grid), 0).unwrap();
        assert_eq!(batch.censored(), 0);
        for r in &batch.records {
            assert!(crate::geometry::norm(&r.exit_position) > 1.0);
        }
        let occ: f64 = batch.occupation.as_ref().unwrap().sum.iter().sum();
        let times: f64 = batch.records.iter().map(|r| r.exit_time).sum();
        assert!((occ - times).abs() < 1e-9 * times);
    }

    #[test]
    fn censoring_is_reported() {
        let dom = Domain::ball(1.0, 3).unwrap();
        let c = SimConfig {
            max_steps: 2,
            ..cfg(1e-4, 200, 2)
        };
        let est = estimate_mean_exit_time(&stable1(), &dom, &[0.0; 3], &c);
        match est {
            Ok(e) => assert!(e.censoring_flagged && e.censored > 100),
            Err(e) => assert!(e.to_string().contains("censored")),
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let dom = Domain::ball(1.0, 2).unwrap();
        let c = cfg(1e-2, 1000, 9);
        let spec = LaplaceExponentSpec::geometric_stable(1.0).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| estimate_mean_exit_time(&spec, &dom, &[0.2, 0.0], &c).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one.mean.to_bits(), run(3).mean.to_bits());
    }

    #[test]
    fn total_exit_probability_is_one() {
        let dom = Domain::ball(1.0, 2).unwrap();
        let d = estimate_exit_distribution(&stable1(), &dom, &[0.0, 0.0], &[Target::Anywhere], &cfg(1e-2, 2000, 3))
            .unwrap();
        assert_eq!(d.probabilities[0].value, 1.0);
    }

    #[test]
    fn mirror_targets_are_equally_likely() {
        let dom = Domain::ball(1.0, 2).unwrap();
        let targets = [
            Target::HalfSpace { normal: vec![1.0, 0.0], offset: 1.0 },
            Target::HalfSpace { normal: vec![-1.0, 0.0], offset: 1.0 },
        ];
        let d = estimate_exit_distribution(&stable1(), &dom, &[0.0, 0.0], &targets, &cfg(1e-2, 20_000, 4)).unwrap();
        let (a, b) = (d.probabilities[0], d.probabilities[1]);
        assert!((a.value - b.value).abs() < 3.0 * (a.se * a.se + b.se * b.se).sqrt());
    }

    #[test]
    fn refining_the_grid_lowers_the_exit_time() {
        let dom = Domain::ball(1.0, 3).unwrap();
        let spec = stable1();
        let mut means = Vec::new();
        for dt in [1e-1, 1e-2, 1e-3] {
            let e = estimate_mean_exit_time(&spec, &dom, &[0.0; 3], &cfg(dt, 10_000, 5)).unwrap();
            means.push((e.mean, e.se));
        }
        assert!(means[0].0 > means[1].0 + 3.0 * means[0].1.hypot(means[1].1));
        assert!(means[1].0 >= means[2].0 - 3.0 * means[1].1.hypot(means[2].1));
        assert!(means[0].0 > means[2].0 + 3.0 * means[0].1.hypot(means[2].1));
    }

    #[test]
    fn slabs_truncate_laterally() {
        let dom = Domain::slab(1.0, 2).unwrap();
        let c = SimConfig {
            lateral_truncation: Some(0.5),
            ..cfg(1e-2, 500, 6)
        };
        assert!(KillingRegion::new(dom.clone(), &cfg(1e-2, 1, 0)).is_err());
        let region = KillingRegion::new(dom, &c).unwrap();
        let batch = simulate_paths(&stable1(), &region, &[0.0, 0.5], &c, None, 0).unwrap();
        assert!(batch.lateral_exits() > 0);
        for r in batch.records.iter().filter(|r| r.lateral_exit) {
            assert!(r.exit_position[0].abs() >= 0.5);
        }
    }

    #[test]
    fn harnack_ratios_stay_bounded() {
        let dom = Domain::ball(1.0, 2).unwrap();
        let c = cfg(1e-2, 4000, 7);
        let region = KillingRegion::new(dom, &c).unwrap();
        let starts = vec![vec![0.0, 0.0], vec![0.25, 0.25], vec![-0.3, 0.1]];
        let targets: Vec<Target> = (0..4)
            .map(|k| {
                let angle = k as f64 * 1.7;
                Target::Ball {
                    center: vec![1.6 * angle.cos(), 1.6 * angle.sin()],
                    radius: 0.5,
                }
            })
            .collect();
        let u = estimate_harmonic(&stable1(), &region, &starts, &targets, &c).unwrap();
        for t in 0..targets.len() {
            let vals: Vec<f64> = u.iter().map(|d| d.probabilities[t].value).collect();
            let hi = vals.iter().cloned().fold(0.0, f64::max);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(lo > 0.0 && hi / lo < 10.0, "{vals:?}");
        }
    }

    #[test]
    fn adaptive_steps_shrink_near_the_boundary() {
        let c = SimConfig {
            stepping: TimeStepping::BoundaryAdaptive { tolerance: 0.1, min_step: 1e-6 },
            ..cfg(1e-2, 1, 0)
        };
        c.validate().unwrap();
        let s = stable1();
        assert!((c.step(&s, 0.01) - 1e-3).abs() < 1e-15);
        assert_eq!(c.step(&s, 0.5), 1e-2);
        assert_eq!(c.step(&s, 1e-9), 1e-6);
    }

    #[test]
    fn occupation_cells_are_consistent() {
        let dom = Domain::ball(1.0, 3).unwrap();
        let grid = OccupationGrid::radial(&dom, 16, None).unwrap();
        let occ = estimate_occupation(&stable1(), &dom, &[0.0; 3], &grid, &cfg(1e-2, 2000, 8)).unwrap();
        let total: f64 = occ.cells.iter().map(|c| c.density * c.cell.volume).sum();
        assert!((total - occ.mean_exit_time).abs() < 1e-9);
        assert!(occ.cells.iter().all(|c| c.density >= 0.0 && c.se >= 0.0));
    }

    #[test]
    fn calibration_matches_exponent() {
        for spec in [
            LaplaceExponentSpec::stable(0.5).unwrap(),
            LaplaceExponentSpec::gamma(),
        ] {
            let cal = calibrate_sampler(&spec, 0.5, &[0.5, 1.0, 4.0], 50_000, 11).unwrap();
            for c in cal {
                assert!(c.z_score() < 4.0, "{spec}: {c:?}");
            }
        }
    }
}
