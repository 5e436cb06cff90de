//! Subcommands of the `ddmec` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ddmec_core::datagen::{
    self, collect_experiments, inject_noise, scalar_demo, seeded_stream, NoiseModel, SampleDist,
};
use ddmec_core::ddctrl::{compose_horizons, validate_rank, HorizonPlan};
use ddmec_core::lti::{final_state_error, load_system, save_system, ControlProblem, LtiSystem};
use ddmec_core::matops::Tolerance;
use ddmec_core::{Error, Vector};

use crate::bench::{self, run_method, Method, MethodSettings};

#[derive(Debug, Parser)]
#[command(
    name = "ddmec",
    version,
    about = "Minimum-energy control inputs from heterogeneous experiment data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a random system and write the experiment dataset.
    Generate(GenerateArgs),
    /// Compute a steering input from a dataset.
    Solve(SolveArgs),
    /// Noiseless sweep over the number of experiments (20 states, 2 inputs).
    Fig1(Fig1Args),
    /// Noisy sweep comparing uncorrected and bias-corrected formulas (4 states, 2 inputs).
    Fig2(Fig2Args),
    /// Write the three-experiment scalar dataset for `x(t+1) = a x(t) + u(t)`.
    DemoScalar(DemoScalarArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub horizons: Vec<usize>,
    /// Experiments per set.
    #[arg(long, required_unless_present = "counts")]
    pub count: Option<usize>,
    /// Per-set experiment counts; overrides `--count`.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "normal")]
    pub dist: SampleDist,
    /// Perturb all data matrices with Gaussian noise of this variance.
    #[arg(long)]
    pub noise_variance: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the generating system, for `solve --sys`.
    #[arg(long)]
    pub sys_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "T")]
    pub horizon: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x0: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub xf: Vec<f64>,
    #[arg(long)]
    pub method: Method,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Generating system: required by `oracle`, enables the final-state check.
    #[arg(long)]
    pub sys: Option<PathBuf>,
    /// Noise variance assumed by the corrected methods; defaults to the
    /// dataset's recorded noise model, or zero.
    #[arg(long)]
    pub variance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Reuse one `(x0, xf)` pair for every trial.
    #[arg(long)]
    pub fixed_endpoints: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Fig2Args {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.1)]
    pub variance: f64,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub fixed_endpoints: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoScalarArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub sys_out: Option<PathBuf>,
}

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid value for --{flag}: {reason}")]
    Flag { flag: &'static str, reason: String },
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Flag { .. } => 2,
            CliError::Core(e) => match e {
                Error::Io(_) | Error::SchemaViolation { .. } => 3,
                Error::NoComposition { .. } => 4,
                Error::RankDeficientData { .. } => 5,
                _ => 1,
            },
        }
    }
}

fn flag(flag: &'static str, reason: impl Into<String>) -> CliError {
    CliError::Flag {
        flag,
        reason: reason.into(),
    }
}

/// Runs a parsed command; the returned text goes to standard output.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Fig1(a) => fig1(a),
        Command::Fig2(a) => fig2(a),
        Command::DemoScalar(a) => demo_scalar(a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Core(e.into()))
}

fn positive(name: &'static str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        Err(flag(name, "must be positive"))
    } else {
        Ok(())
    }
}

fn tolerance(v: f64) -> Result<Tolerance, CliError> {
    Tolerance::new(v).map_err(|e| flag("epsilon", e.to_string()))
}

fn grid(values: Option<Vec<usize>>, default: Vec<usize>) -> Result<Vec<usize>, CliError> {
    let g = values.unwrap_or(default);
    if g.is_empty() || g.contains(&0) {
        return Err(flag("n-grid", "needs positive experiment counts"));
    }
    Ok(g)
}

fn generate(args: GenerateArgs) -> Result<String, CliError> {
    positive("n", args.n)?;
    positive("m", args.m)?;
    if args.horizons.is_empty() || args.horizons.contains(&0) {
        return Err(flag("horizons", "needs positive horizons"));
    }
    let counts = match (&args.counts, args.count) {
        (Some(c), _) => {
            if c.len() != args.horizons.len() {
                return Err(flag(
                    "counts",
                    format!("{} counts for {} horizons", c.len(), args.horizons.len()),
                ));
            }
            if c.contains(&0) {
                return Err(flag("counts", "must be positive"));
            }
            c.clone()
        }
        (None, Some(c)) => {
            positive("count", c)?;
            vec![c; args.horizons.len()]
        }
        (None, None) => return Err(flag("count", "missing")),
    };
    let sys = LtiSystem::random(args.n, args.m, &mut seeded_stream(args.seed, &[0]))?;
    let mut ds = collect_experiments(&sys, &args.horizons, &counts, args.seed, args.dist)?;
    if let Some(v) = args.noise_variance {
        let noise = NoiseModel::uniform(v).map_err(|e| flag("noise-variance", e.to_string()))?;
        ds = inject_noise(&ds, noise, args.seed)?;
    }
    datagen::save(&ds, &args.out)?;
    if let Some(p) = &args.sys_out {
        save_system(&sys, p)?;
    }

    let mut out = String::new();
    let horizons = ds.horizons();
    for i in 0..horizons.len() {
        let plan = HorizonPlan::new(vec![i], &horizons)?;
        let report = validate_rank(&ds, &plan, Tolerance::default())?;
        let s = &report.segments[0];
        let _ = writeln!(
            out,
            "set {i}: T = {}, N = {}, rank {} of {} rows, smallest singular value {:e}, {}",
            horizons[i],
            s.experiments,
            s.rank,
            s.rows,
            s.smallest_singular_value,
            if s.full_row_rank { "ok" } else { "RANK DEFICIENT" }
        );
    }
    let _ = writeln!(out, "wrote {}", args.out.display());
    Ok(out)
}

fn format_vector(v: &Vector) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

fn solve(args: SolveArgs) -> Result<String, CliError> {
    positive("T", args.horizon)?;
    let tol = tolerance(args.epsilon)?;
    let ds = datagen::load(&args.data)?;
    if args.x0.len() != ds.n() {
        return Err(flag(
            "x0",
            format!("{} entries, the data have n = {}", args.x0.len(), ds.n()),
        ));
    }
    if args.xf.len() != ds.n() {
        return Err(flag(
            "xf",
            format!("{} entries, the data have n = {}", args.xf.len(), ds.n()),
        ));
    }
    let noise = match args.variance {
        Some(v) => NoiseModel::uniform(v).map_err(|e| flag("variance", e.to_string()))?,
        None => ds.noise().copied().unwrap_or_else(NoiseModel::zero),
    };
    let sys = args.sys.as_deref().map(load_system).transpose()?;
    if args.method == Method::Oracle && sys.is_none() {
        return Err(flag("sys", "the oracle method needs the generating system"));
    }
    let plan = compose_horizons(&ds.horizons(), args.horizon)?;
    let prob = ControlProblem::new(Vector::from_vec(args.x0), Vector::from_vec(args.xf), args.horizon)?;
    let settings = MethodSettings {
        tol,
        noise,
        require_full_rank: true,
    };
    let u = run_method(args.method, sys.as_ref(), &ds, &plan, &prob, &settings)?;

    let mut out = String::new();
    let parts: Vec<String> = plan
        .segment_horizons()
        .iter()
        .zip(plan.indices())
        .map(|(t, i)| format!("set {i} (T = {t})"))
        .collect();
    let _ = writeln!(out, "plan: {}", parts.join(" + "));
    let _ = writeln!(out, "method: {}", args.method);
    let _ = writeln!(
        out,
        "u (stacked, reversed time: u(T-1) first): [{}]",
        format_vector(u.stacked())
    );
    let _ = writeln!(out, "norm: {}", u.norm());
    if let Some(sys) = &sys {
        let _ = writeln!(out, "final error: {:e}", final_state_error(sys, &prob, &u)?);
    }
    Ok(out)
}

fn fig1(args: Fig1Args) -> Result<String, CliError> {
    positive("trials", args.trials)?;
    let defaults = bench::Fig1Config::default();
    let cfg = bench::Fig1Config {
        grid: grid(args.n_grid, defaults.grid.clone())?,
        trials: args.trials,
        seed: args.seed,
        fixed_endpoints: args.fixed_endpoints,
        ..defaults
    };
    let records = bench::run_fig1(&cfg)?;
    let rows = bench::fig1_rows(&records, &cfg.grid);
    write_text(&args.out, &bench::fig1_csv(&rows))?;

    let mut out = String::new();
    match bench::fig1_threshold(&rows, 1e-6) {
        Some(n) => {
            let _ = writeln!(out, "data-driven inputs match the oracle from N = {n} on");
        }
        None => {
            let _ = writeln!(out, "data-driven inputs never match the oracle on this grid");
        }
    }
    let _ = writeln!(out, "wrote {}", args.out.display());
    Ok(out)
}

fn fig2(args: Fig2Args) -> Result<String, CliError> {
    positive("trials", args.trials)?;
    if !args.variance.is_finite() || args.variance < 0.0 {
        return Err(flag("variance", "must be finite and non-negative"));
    }
    let defaults = bench::Fig2Config::default();
    let cfg = bench::Fig2Config {
        grid: grid(args.n_grid, defaults.grid.clone())?,
        trials: args.trials,
        variance: args.variance,
        tol: tolerance(args.epsilon)?,
        seed: args.seed,
        fixed_endpoints: args.fixed_endpoints,
        ..defaults
    };
    let records = bench::run_fig2(&cfg)?;
    let rows = bench::summarize(&records, cfg.seed);
    write_text(&args.out, &bench::fig2_csv(&rows))?;
    Ok(format!("wrote {}\n", args.out.display()))
}

fn demo_scalar(args: DemoScalarArgs) -> Result<String, CliError> {
    if !args.a.is_finite() {
        return Err(flag("a", "must be finite"));
    }
    let ds = scalar_demo(args.a)?;
    datagen::save(&ds, &args.out)?;
    if let Some(p) = &args.sys_out {
        let sys = LtiSystem::new(
            ddmec_core::Matrix::from_element(1, 1, args.a),
            ddmec_core::Matrix::from_element(1, 1, 1.0),
        )?;
        save_system(&sys, p)?;
    }
    Ok(format!("wrote {}\n", args.out.display()))
}
