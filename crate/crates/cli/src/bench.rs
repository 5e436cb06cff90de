//! Monte Carlo sweeps over the number of experiments per set.
//!
//! `fig1` runs noiseless data on a 20-state system and compares the two
//! data-driven formulas against the model-based input. `fig2` runs noisy
//! data on a 4-state system and compares uncorrected and bias-corrected
//! formulas. Every final-state error is obtained by simulating the true
//! system with the produced input.

use std::fmt;
use std::str::FromStr;

use ddmec_core::datagen::{collect_experiments, inject_noise, seeded_stream, Dataset, NoiseModel, SampleDist};
use ddmec_core::ddctrl::{compose_horizons, min_energy_glued, min_energy_projected, HorizonPlan, SolveOptions};
use ddmec_core::lti::{final_state_error, min_energy_oracle, ControlProblem, InputSequence, LtiSystem};
use ddmec_core::matops::Tolerance;
use ddmec_core::noisectrl::{min_energy_corrected_direct, min_energy_corrected_gramian};
use ddmec_core::{Result, Vector};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

// Stream tags under the master seed.
const SYSTEM: u64 = 1;
const DATA: u64 = 2;
const NOISE: u64 = 3;
const ENDPOINTS: u64 = 4;
const BOOTSTRAP: u64 = 5;

/// Solvers compared by the sweeps. Command-line names are in [`Method::name`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Model-based reference; needs the true system.
    Oracle,
    /// Kernel-projected representation formula (`thm2`).
    Projected,
    /// Glued controllability estimate (`thm3`).
    Glued,
    /// Bias-corrected `thm2` (`thm2c`).
    ProjectedCorrected,
    /// Bias-corrected `thm3` (`thm3c`).
    GluedCorrected,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Oracle,
        Method::Projected,
        Method::Glued,
        Method::ProjectedCorrected,
        Method::GluedCorrected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Projected => "thm2",
            Method::Glued => "thm3",
            Method::ProjectedCorrected => "thm2_corrected",
            Method::GluedCorrected => "thm3_corrected",
        }
    }

    pub fn is_corrected(self) -> bool {
        matches!(self, Method::ProjectedCorrected | Method::GluedCorrected)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Method::Oracle),
            "thm2" => Ok(Method::Projected),
            "thm3" => Ok(Method::Glued),
            "thm2c" | "thm2_corrected" => Ok(Method::ProjectedCorrected),
            "thm3c" | "thm3_corrected" => Ok(Method::GluedCorrected),
            other => Err(format!(
                "unknown method `{other}` (expected oracle, thm2, thm3, thm2c, thm3c)"
            )),
        }
    }
}

/// Solver settings shared by the data-driven methods.
#[derive(Debug, Clone, Copy)]
pub struct MethodSettings {
    pub tol: Tolerance,
    /// Variances handed to the corrected methods.
    pub noise: NoiseModel,
    /// Refuse rank-deficient data instead of evaluating the formulas anyway.
    pub require_full_rank: bool,
}

/// Runs one method. `sys` is only consulted by the oracle.
pub fn run_method(
    method: Method,
    sys: Option<&LtiSystem>,
    ds: &Dataset,
    plan: &HorizonPlan,
    prob: &ControlProblem,
    settings: &MethodSettings,
) -> Result<InputSequence> {
    let opts = SolveOptions {
        tol: settings.tol,
        require_full_rank: settings.require_full_rank,
    };
    match method {
        Method::Oracle => {
            let sys =
                sys.ok_or_else(|| ddmec_core::Error::BadShape("the oracle needs the generating system".into()))?;
            min_energy_oracle(sys, prob)
        }
        Method::Projected => min_energy_projected(ds, plan, prob, &opts),
        Method::Glued => min_energy_glued(ds, plan, prob, &opts),
        Method::ProjectedCorrected => min_energy_corrected_direct(ds, plan, prob, &settings.noise, settings.tol),
        Method::GluedCorrected => min_energy_corrected_gramian(ds, plan, prob, &settings.noise, settings.tol),
    }
}

/// Outcome of one method on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiments: usize,
    pub trial: usize,
    pub method: Method,
    pub input_norm: f64,
    /// `||x(T) - xf|| / ||xf||`, by simulation of the true system.
    pub final_err: f64,
}

/// Mean, median and a 95% percentile-bootstrap interval of the median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub const BOOTSTRAP_RESAMPLES: usize = 2000;

fn median_of(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Interpolated percentile of sorted data, `p` in `[0, 1]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Summary {
    /// Panics on an empty sample.
    pub fn from_sample(values: &[f64], rng: &mut ChaCha8Rng) -> Self {
        assert!(!values.is_empty(), "summary of an empty sample");
        let data = sorted(values);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let median = median_of(&data);
        let mut medians = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        let mut resample = vec![0.0; values.len()];
        for _ in 0..BOOTSTRAP_RESAMPLES {
            for slot in resample.iter_mut() {
                *slot = values[rng.random_range(0..values.len())];
            }
            resample.sort_by(f64::total_cmp);
            medians.push(median_of(&resample));
        }
        medians.sort_by(f64::total_cmp);
        Summary {
            mean,
            median,
            ci_lo: percentile(&medians, 0.025).min(median),
            ci_hi: percentile(&medians, 0.975).max(median),
        }
    }
}

/// Per-(N, method) summaries of input norms and final-state errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub experiments: usize,
    pub method: Method,
    pub input_norm: Summary,
    pub final_err: Summary,
}

fn derived_seed(master: u64, path: &[u64]) -> u64 {
    seeded_stream(master, path).next_u64()
}

fn gaussian(len: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Standard-normal `x0`, `xf` for one trial; trial 0's pair when `fixed`.
fn endpoints(master: u64, trial: usize, n: usize, horizon: usize, fixed: bool) -> Result<ControlProblem> {
    let key = if fixed { 0 } else { trial as u64 };
    let mut rng = seeded_stream(master, &[ENDPOINTS, key]);
    let x0 = gaussian(n, &mut rng);
    let xf = gaussian(n, &mut rng);
    ControlProblem::new(x0, xf, horizon)
}

fn record(
    method: Method,
    experiments: usize,
    trial: usize,
    sys: &LtiSystem,
    prob: &ControlProblem,
    u: &InputSequence,
) -> Result<TrialRecord> {
    Ok(TrialRecord {
        experiments,
        trial,
        method,
        input_norm: u.norm(),
        final_err: final_state_error(sys, prob, u)?,
    })
}

/// Settings of the noiseless sweep.
#[derive(Debug, Clone)]
pub struct Fig1Config {
    pub n: usize,
    pub m: usize,
    pub horizons: Vec<usize>,
    pub target: usize,
    pub grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub tol: Tolerance,
    pub fixed_endpoints: bool,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Fig1Config {
            n: 20,
            m: 2,
            horizons: vec![3, 4, 5, 6],
            target: 18,
            grid: (4..=60).step_by(2).collect(),
            trials: 500,
            seed: 1,
            tol: Tolerance::default(),
            fixed_endpoints: false,
        }
    }
}

pub const FIG1_METHODS: [Method; 3] = [Method::Oracle, Method::Projected, Method::Glued];

/// Means over trials for one grid point and method.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Row {
    pub experiments: usize,
    pub method: Method,
    pub mean_input_norm: f64,
    pub mean_final_err: f64,
}

pub fn fig1_system(cfg: &Fig1Config) -> Result<LtiSystem> {
    LtiSystem::random(cfg.n, cfg.m, &mut seeded_stream(cfg.seed, &[SYSTEM]))
}

/// One trial of the noiseless sweep: fresh data for `(N, trial)`, endpoints per trial.
fn fig1_trial(
    cfg: &Fig1Config,
    sys: &LtiSystem,
    plan: &HorizonPlan,
    experiments: usize,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let counts = vec![experiments; cfg.horizons.len()];
    let data_seed = derived_seed(cfg.seed, &[DATA, experiments as u64, trial as u64]);
    let ds = collect_experiments(sys, &cfg.horizons, &counts, data_seed, SampleDist::Normal)?;
    let prob = endpoints(cfg.seed, trial, cfg.n, cfg.target, cfg.fixed_endpoints)?;
    let settings = MethodSettings {
        tol: cfg.tol,
        noise: NoiseModel::zero(),
        // Below the rank threshold the formulas are still evaluated.
        require_full_rank: false,
    };
    FIG1_METHODS
        .iter()
        .map(|&method| {
            let u = run_method(method, Some(sys), &ds, plan, &prob, &settings)?;
            record(method, experiments, trial, sys, &prob, &u)
        })
        .collect()
}

pub fn run_fig1(cfg: &Fig1Config) -> Result<Vec<TrialRecord>> {
    let sys = fig1_system(cfg)?;
    let plan = compose_horizons(&cfg.horizons, cfg.target)?;
    let jobs: Vec<(usize, usize)> = cfg
        .grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let nested = jobs
        .par_iter()
        .map(|&(n, t)| fig1_trial(cfg, &sys, &plan, n, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Rows in grid order, methods in [`FIG1_METHODS`] order.
pub fn fig1_rows(records: &[TrialRecord], grid: &[usize]) -> Vec<Fig1Row> {
    let mut rows = Vec::new();
    for &n in grid {
        for method in FIG1_METHODS {
            let sel: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.experiments == n && r.method == method)
                .collect();
            if sel.is_empty() {
                continue;
            }
            let k = sel.len() as f64;
            rows.push(Fig1Row {
                experiments: n,
                method,
                mean_input_norm: sel.iter().map(|r| r.input_norm).sum::<f64>() / k,
                mean_final_err: sel.iter().map(|r| r.final_err).sum::<f64>() / k,
            });
        }
    }
    rows
}

/// Smallest grid point from which on both data-driven methods reach the
/// target (mean final error `<= tol`) and their mean input norm matches the
/// oracle's within `tol` (relative).
pub fn fig1_threshold(rows: &[Fig1Row], tol: f64) -> Option<usize> {
    let mut grid: Vec<usize> = rows.iter().map(|r| r.experiments).collect();
    grid.dedup();
    let good = |n: usize| -> bool {
        let oracle = rows.iter().find(|r| r.experiments == n && r.method == Method::Oracle);
        let Some(oracle) = oracle else { return false };
        rows.iter()
            .filter(|r| r.experiments == n && r.method != Method::Oracle)
            .all(|r| {
                r.mean_final_err <= tol
                    && (r.mean_input_norm - oracle.mean_input_norm).abs() <= tol * oracle.mean_input_norm.max(1.0)
            })
    };
    let mut threshold = None;
    for &n in grid.iter().rev() {
        if good(n) {
            threshold = Some(n);
        } else {
            break;
        }
    }
    threshold
}

pub fn fig1_csv(rows: &[Fig1Row]) -> String {
    let mut out = String::from("N,method,mean_input_norm,mean_final_err\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.experiments, r.method, r.mean_input_norm, r.mean_final_err
        ));
    }
    out
}

/// Settings of the noisy sweep.
#[derive(Debug, Clone)]
pub struct Fig2Config {
    pub n: usize,
    pub m: usize,
    pub horizons: Vec<usize>,
    pub target: usize,
    pub dist: SampleDist,
    pub variance: f64,
    pub grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub tol: Tolerance,
    pub fixed_endpoints: bool,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Fig2Config {
            n: 4,
            m: 2,
            horizons: vec![3, 4],
            target: 7,
            dist: SampleDist::Uniform01,
            variance: 0.1,
            grid: vec![100, 215, 464, 1000, 2154, 4642, 10000],
            trials: 100,
            seed: 1,
            tol: Tolerance::default(),
            fixed_endpoints: false,
        }
    }
}

pub const FIG2_METHODS: [Method; 4] = [
    Method::Projected,
    Method::Glued,
    Method::ProjectedCorrected,
    Method::GluedCorrected,
];

pub fn fig2_system(cfg: &Fig2Config) -> Result<LtiSystem> {
    LtiSystem::random(cfg.n, cfg.m, &mut seeded_stream(cfg.seed, &[SYSTEM]))
}

/// Fixed system; clean data per `N`; noise and endpoints per trial.
pub fn run_fig2(cfg: &Fig2Config) -> Result<Vec<TrialRecord>> {
    let sys = fig2_system(cfg)?;
    let plan = compose_horizons(&cfg.horizons, cfg.target)?;
    let noise = NoiseModel::uniform(cfg.variance)?;
    let settings = MethodSettings {
        tol: cfg.tol,
        noise,
        require_full_rank: false,
    };
    let mut records = Vec::new();
    for &experiments in &cfg.grid {
        let counts = vec![experiments; cfg.horizons.len()];
        let clean = collect_experiments(
            &sys,
            &cfg.horizons,
            &counts,
            derived_seed(cfg.seed, &[DATA, experiments as u64]),
            cfg.dist,
        )?;
        let batch = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<Vec<TrialRecord>> {
                let noise_seed = derived_seed(cfg.seed, &[NOISE, experiments as u64, trial as u64]);
                let noisy = inject_noise(&clean, noise, noise_seed)?;
                let prob = endpoints(cfg.seed, trial, cfg.n, cfg.target, cfg.fixed_endpoints)?;
                FIG2_METHODS
                    .iter()
                    .map(|&method| {
                        let u = run_method(method, Some(&sys), &noisy, &plan, &prob, &settings)?;
                        record(method, experiments, trial, &sys, &prob, &u)
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        records.extend(batch.into_iter().flatten());
    }
    Ok(records)
}

/// Summaries in grid order, methods in the order they first appear.
pub fn summarize(records: &[TrialRecord], seed: u64) -> Vec<SweepSummary> {
    let mut keys: Vec<(usize, Method)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.experiments, r.method)) {
            keys.push((r.experiments, r.method));
        }
    }
    keys.iter()
        .map(|&(n, method)| {
            let sel: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.experiments == n && r.method == method)
                .collect();
            let norms: Vec<f64> = sel.iter().map(|r| r.input_norm).collect();
            let errs: Vec<f64> = sel.iter().map(|r| r.final_err).collect();
            let tag = Method::ALL.iter().position(|&m| m == method).unwrap_or(0) as u64;
            let mut rng = seeded_stream(seed, &[BOOTSTRAP, n as u64, tag]);
            SweepSummary {
                experiments: n,
                method,
                input_norm: Summary::from_sample(&norms, &mut rng),
                final_err: Summary::from_sample(&errs, &mut rng),
            }
        })
        .collect()
}

pub fn fig2_csv(rows: &[SweepSummary]) -> String {
    let mut out = String::from(
        "N,method,input_norm_mean,input_norm_median,input_norm_ci_lo,input_norm_ci_hi,\
         final_err_mean,final_err_median,final_err_ci_lo,final_err_ci_hi\n",
    );
    for r in rows {
        let (a, b) = (&r.input_norm, &r.final_err);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.experiments, r.method, a.mean, a.median, a.ci_lo, a.ci_hi, b.mean, b.median, b.ci_lo, b.ci_hi
        ));
    }
    out
}
