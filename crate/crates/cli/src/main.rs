use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sbm_core::bernstein::LaplaceExponentSpec;
use sbm_core::estimates;
use sbm_core::geometry::Domain;
use sbm_core::harness::{run_experiment, write_artifacts, ExperimentConfig, ExperimentKind};
use sbm_core::simulate::{
    self, calibrate_sampler, estimate_exit_distribution, estimate_mean_exit_time,
    estimate_occupation, richardson_exit_time, OccupationGrid, SimConfig, Target,
};

/// Green-function estimates and Monte Carlo for subordinate Brownian motions.
#[derive(Parser, Debug)]
#[command(name = "sbm", version)]
struct Cli {
    /// Worker threads for simulation (default: all cores). Results do not
    /// depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a closed-form shape (constant 1).
    #[command(subcommand)]
    Estimate(EstimateCmd),
    /// Monte Carlo estimates for the killed process.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Run an experiment described by a TOML config and write its artifacts.
    Run(RunArgs),
    /// Scaling indices, Bernstein sign checks and ladder comparability.
    ConditionReport(ConditionArgs),
}

#[derive(Args, Debug)]
struct FamilyArg {
    /// Family id, e.g. `stable{alpha=1}`, `geom{alpha=1}`, `gamma`.
    #[arg(long)]
    family: String,
}

impl FamilyArg {
    fn spec(&self) -> Result<LaplaceExponentSpec> {
        self.family.parse().with_context(|| format!("family `{}`", self.family))
    }
}

#[derive(Args, Debug)]
struct DomainArgs {
    /// Domain literal: `ball:R`, `annulus:R1:R2`, `balls:[(c),r;...]`, `slab:h`.
    #[arg(long)]
    domain: String,
    #[arg(long, default_value_t = 3)]
    dim: usize,
}

impl DomainArgs {
    fn domain(&self) -> Result<Domain> {
        Domain::parse(&self.domain, self.dim).with_context(|| format!("domain `{}`", self.domain))
    }
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Start point, comma separated; the origin when omitted.
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Lateral half-width for slab domains.
    #[arg(long)]
    lateral: Option<f64>,
}

impl SimArgs {
    fn apply(&self, cfg: &mut SimConfig) {
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.paths {
            cfg.n_paths = v;
        }
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.max_steps {
            cfg.max_steps = v;
        }
        if let Some(v) = self.lateral {
            cfg.lateral_truncation = Some(v);
        }
    }

    fn config(&self) -> SimConfig {
        let mut cfg = SimConfig::default();
        self.apply(&mut cfg);
        cfg
    }

    fn start(&self, d: usize) -> Result<Vec<f64>> {
        match &self.x0 {
            Some(s) => parse_point(s, d),
            None => Ok(vec![0.0; d]),
        }
    }
}

fn parse_point(s: &str, d: usize) -> Result<Vec<f64>> {
    let p = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("coordinate `{t}`")))
        .collect::<Result<Vec<f64>>>()?;
    if p.len() != d {
        bail!("point `{s}` has {} coordinates, expected {d}", p.len());
    }
    Ok(p)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("number `{t}`")))
        .collect()
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PoissonBound {
    Upper,
    UpperUniform,
    Lower,
}

#[derive(Subcommand, Debug)]
enum EstimateCmd {
    /// Two-sided Green shape g_D(x, y).
    Green {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Green shape in the power-scaling form.
    GreenScaling {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Mean exit time shapes for B(x0, r) started at distance s from x0.
    Exit {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
    },
    /// Poisson kernel shapes for B(x0, r).
    Poisson {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        sx: f64,
        #[arg(long)]
        sy: f64,
        #[arg(long, value_enum, default_value_t = PoissonBound::Upper)]
        bound: PoissonBound,
    },
    /// Boundary Harnack envelope √(φ(δy⁻²)/φ(δx⁻²)).
    Bhp {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        delta_x: f64,
        #[arg(long)]
        delta_y: f64,
    },
    /// Half-space barrier w(x) = V(x_d⁺).
    Barrier {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        xd: f64,
    },
}

#[derive(Subcommand, Debug)]
enum SimulateCmd {
    /// Mean exit time, optionally Richardson-extrapolated.
    Exit {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Fine step for extrapolation against `--dt`.
        #[arg(long)]
        fine_dt: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        order: f64,
    },
    /// Occupation density per equal-volume shell.
    Occupation {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = simulate::DEFAULT_SHELLS)]
        shells: usize,
        /// Also print the per-cell table as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Exit probabilities into target sets given as JSON, e.g.
    /// `{"kind":"ball","center":[5,0,0],"radius":1}`.
    Harmonic {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long = "target", required = true)]
        targets: Vec<String>,
    },
    /// Empirical Laplace transform of subordinator increments.
    Calibrate {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value = "0.5,1,4")]
        lambdas: String,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    domain: Option<String>,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args, Debug)]
struct ConditionArgs {
    #[command(flatten)]
    family: FamilyArg,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long)]
    window_min: Option<f64>,
    #[arg(long)]
    window_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn estimate(cmd: &EstimateCmd) -> Result<()> {
    let out = match cmd {
        EstimateCmd::Green { family, domain, x, y } | EstimateCmd::GreenScaling { family, domain, x, y } => {
            let spec = family.spec()?;
            let dom = domain.domain()?;
            let (x, y) = (parse_point(x, dom.dimension)?, parse_point(y, dom.dimension)?);
            let est = match cmd {
                EstimateCmd::Green { .. } => estimates::green_estimate(&spec, &dom, &x, &y)?,
                _ => estimates::green_estimate_scaling(&spec, &dom, &x, &y)?,
            };
            serde_json::to_value(est)?
        }
        EstimateCmd::Exit { family, r, s } => {
            let spec = family.spec()?;
            json!({
                "upper": estimates::exit_time_upper(&spec, *r, *s)?,
                "lower": estimates::exit_time_lower(&spec, *r)?,
            })
        }
        EstimateCmd::Poisson {
            family,
            dim,
            r,
            sx,
            sy,
            bound,
        } => {
            let spec = family.spec()?;
            let est = match bound {
                PoissonBound::Upper => estimates::poisson_upper(&spec, *dim, *r, *sx, *sy)?,
                PoissonBound::UpperUniform => estimates::poisson_upper_worse(&spec, *dim, *r, *sx, *sy)?,
                PoissonBound::Lower => estimates::poisson_lower(&spec, *dim, *r, *sy)?,
            };
            serde_json::to_value(est)?
        }
        EstimateCmd::Bhp {
            family,
            delta_x,
            delta_y,
        } => serde_json::to_value(estimates::bhp_bound(&family.spec()?, *delta_x, *delta_y)?)?,
        EstimateCmd::Barrier { family, xd } => {
            json!({ "x_d": xd, "value": estimates::halfspace_barrier_w(&family.spec()?, *xd) })
        }
    };
    print_json(&out)
}

fn simulate_cmd(cmd: &SimulateCmd) -> Result<()> {
    match cmd {
        SimulateCmd::Exit {
            family,
            domain,
            sim,
            fine_dt,
            order,
        } => {
            let (spec, dom) = (family.spec()?, domain.domain()?);
            let cfg = sim.config();
            let x0 = sim.start(dom.dimension)?;
            match fine_dt {
                Some(fine) => print_json(&richardson_exit_time(&spec, &dom, &x0, &cfg, cfg.dt, *fine, *order)?),
                None => print_json(&estimate_mean_exit_time(&spec, &dom, &x0, &cfg)?),
            }
        }
        SimulateCmd::Occupation {
            family,
            domain,
            sim,
            shells,
            csv,
        } => {
            let (spec, dom) = (family.spec()?, domain.domain()?);
            let cfg = sim.config();
            let x0 = sim.start(dom.dimension)?;
            let grid = OccupationGrid::radial(&dom, *shells, cfg.lateral_truncation)?;
            let occ = estimate_occupation(&spec, &dom, &x0, &grid, &cfg)?;
            if *csv {
                println!("cell,component,inner,outer,volume,density,se");
                for (k, c) in occ.cells.iter().enumerate() {
                    println!(
                        "{k},{},{},{},{},{},{}",
                        c.cell.component, c.cell.inner, c.cell.outer, c.cell.volume, c.density, c.se
                    );
                }
                Ok(())
            } else {
                print_json(&occ)
            }
        }
        SimulateCmd::Harmonic {
            family,
            domain,
            sim,
            targets,
        } => {
            let (spec, dom) = (family.spec()?, domain.domain()?);
            let cfg = sim.config();
            let x0 = sim.start(dom.dimension)?;
            let targets = targets
                .iter()
                .map(|t| serde_json::from_str::<Target>(t).with_context(|| format!("target `{t}`")))
                .collect::<Result<Vec<_>>>()?;
            print_json(&estimate_exit_distribution(&spec, &dom, &x0, &targets, &cfg)?)
        }
        SimulateCmd::Calibrate {
            family,
            t,
            lambdas,
            draws,
            seed,
        } => {
            let cal = calibrate_sampler(&family.spec()?, *t, &parse_list(lambdas)?, *draws, *seed)?;
            let rows: Vec<_> = cal
                .iter()
                .map(|c| json!({ "calibration": c, "z": c.z_score() }))
                .collect();
            print_json(&rows)
        }
    }
}

fn finish(report: &sbm_core::harness::ExperimentReport, out: Option<PathBuf>) -> Result<ExitCode> {
    match out {
        Some(dir) => {
            let (json_path, csv_path) = write_artifacts(report, &dir)?;
            log::info!("wrote {} and {}", json_path.display(), csv_path.display());
            print_json(&json!({
                "passed": report.passed,
                "assertions": report.assertions,
                "report": json_path,
                "probes": csv_path,
            }))?;
        }
        None => print!("{}", report.to_json()?),
    }
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(f) = &args.family {
        cfg.family = f.clone();
    }
    if let Some(d) = &args.domain {
        cfg.domain = Some(d.clone());
    }
    args.sim.apply(&mut cfg.sim);
    if let Some(x0) = &args.sim.x0 {
        cfg.probes.starts = vec![parse_point(x0, cfg.dimension)?];
    }
    let report = run_experiment(&cfg)?;
    finish(&report, args.out.clone().or(cfg.output.dir.clone()))
}

fn condition(args: &ConditionArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::ConditionReport, &args.family.family);
    cfg.dimension = args.dim;
    if let Some(v) = args.window_min {
        cfg.probes.window_min = v;
    }
    if let Some(v) = args.window_max {
        cfg.probes.window_max = v;
    }
    let report = run_experiment(&cfg)?;
    finish(&report, args.out.clone())
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Estimate(cmd) => estimate(cmd).map(|_| ExitCode::SUCCESS),
        Command::Simulate(cmd) => simulate_cmd(cmd).map(|_| ExitCode::SUCCESS),
        Command::Run(args) => run(args),
        Command::ConditionReport(args) => condition(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
