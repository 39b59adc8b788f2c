//! The `massroot` command line.
//!
//! Exit status is 0 when every run met its tolerance, 2 when a run used up
//! its sample budget first, and 1 on any error, including usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::density::{default_k, DensityParams};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::field::{builtin, ScalarField, TestProblem};
use crate::geometry::Domain;
use crate::harness::{eta_floor, fit_rate, median, run_experiment, ConvergenceTrace, RateModel};
use crate::multiroot::{find_all, MultiRootConfig, MultiRootOutcome, RoundVerdict};
use crate::samplers::{AdaptiveConfig, HistorySource, ProposalWeighting};
use crate::solver::{solve, SamplerKind, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "massroot", version, about = "Stochastic global root finder")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find one root (or all of them with --multiroot).
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Search for several roots with exclusion balls.
        #[arg(long)]
        multiroot: bool,
        #[command(flatten)]
        multi: MultiArgs,
    },
    /// Find roots one after another, excluding a ball around each.
    Multiroot {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        multi: MultiArgs,
    },
    /// Run one configuration over many seeds and summarize convergence.
    Experiment {
        #[command(flatten)]
        run: RunArgs,
        /// Seeds as a list `1,2,3` or a half-open range `0..10`.
        #[arg(long, default_value = "0..10")]
        seeds: String,
        /// Fit the median error curve with this model.
        #[arg(long, value_enum)]
        fit: Option<FitArg>,
        /// Measure the error floor for each of these eta values (comma separated).
        #[arg(long, value_delimiter = ',')]
        etas: Vec<f64>,
        /// Directory for one trace CSV per seed.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// `builtin:<name>` or `expr:<expression in x1..xn>`.
    #[arg(long)]
    pub function: String,
    /// Box as `lo,hi;lo,hi;...`. Defaults to the builtin's own domain.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long, value_enum, default_value_t = SamplerArg::Adaptive)]
    pub sampler: SamplerArg,
    /// Density exponent. Defaults to the problem's suggestion or the dimension rule.
    #[arg(long)]
    pub k: Option<u32>,
    /// Regularization of the density.
    #[arg(long, default_value_t = 1e-8)]
    pub eta: f64,
    /// Samples between proposal updates.
    #[arg(long, default_value_t = 5)]
    pub update_every: usize,
    /// Estimates in the sigma window. Defaults to 10 times the dimension.
    #[arg(long)]
    pub window: Option<usize>,
    /// Batches before sigma first adapts. Defaults to half the window.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Stop once every sigma component is below this.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Smallest sigma, as a fraction of each box width.
    #[arg(long, default_value_t = 1e-12)]
    pub sigma_floor: f64,
    #[arg(long, value_enum, default_value_t = HistoryArg::Batch)]
    pub history: HistoryArg,
    #[arg(long, value_enum, default_value_t = WeightingArg::Kernel)]
    pub weighting: WeightingArg,
    /// Random seed. Drawn from the OS and echoed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample budget per run.
    #[arg(long, default_value_t = 100_000)]
    pub max_samples: usize,
    /// Threads sharing each batch of samples.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Write the convergence trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MultiArgs {
    #[arg(long, default_value_t = 8)]
    pub max_roots: usize,
    /// Radius of the ball removed around each root. Defaults to 5% of the box diagonal.
    #[arg(long)]
    pub exclusion_radius: Option<f64>,
    /// Largest |f| accepted as a root.
    #[arg(long, default_value_t = 1e-6)]
    pub residual_accept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Uniform,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HistoryArg {
    Batch,
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Kernel,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitArg {
    Power,
    Exponential,
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Solve { run, multiroot: true, multi } | Command::Multiroot { run, multi } => {
            cmd_multiroot(&run, &multi, out, err)
        }
        Command::Solve { run, .. } => cmd_solve(&run, out, err),
        Command::Experiment { run, seeds, fit, etas, trace_dir } => {
            cmd_experiment(&run, &seeds, fit, &etas, trace_dir.as_deref(), out, err)
        }
    }
}

/// Resolves `--function` and `--domain`. Expressions get no known roots.
pub fn resolve_problem(function: &str, domain: Option<&str>, err: &mut dyn Write) -> Result<TestProblem> {
    let domain = domain.map(str::parse::<Domain>).transpose()?;
    if let Some(name) = function.strip_prefix("builtin:") {
        let mut problem = builtin(name)?;
        if let Some(d) = domain {
            if d.dim() != problem.dim() {
                return Err(Error::InvalidConfig(format!(
                    "{name} takes {} variables but the domain has {}",
                    problem.dim(),
                    d.dim()
                )));
            }
            problem.domain = d;
        }
        return Ok(problem);
    }
    if let Some(text) = function.strip_prefix("expr:") {
        let domain = domain.ok_or_else(|| Error::InvalidConfig("an expression needs --domain".into()))?;
        let e = Expression::parse(text, domain.dim())?;
        if e.variables_used() < domain.dim() {
            let _ = writeln!(
                err,
                "warning: expression uses {} of the domain's {} variables",
                e.variables_used(),
                domain.dim()
            );
        }
        let field: Arc<dyn ScalarField> = Arc::new(e.to_field());
        let problem = TestProblem {
            name: text.to_string(),
            field,
            domain,
            known_roots: Vec::new(),
            multiplicity: Vec::new(),
            suggested_k: None,
        };
        return Ok(problem);
    }
    Err(Error::InvalidConfig(format!("--function must start with `builtin:` or `expr:`, got `{function}`")))
}

pub fn solver_config(run: &RunArgs, problem: &TestProblem) -> Result<SolverConfig> {
    let n = problem.dim();
    let k = match run.k {
        Some(k) => k,
        None if problem.known_roots.is_empty() => default_k(n, 1),
        None => problem.k(),
    };
    let adaptive = AdaptiveConfig {
        update_every: run.update_every,
        window: run.window,
        tol: run.tol,
        sigma_floor: run.sigma_floor,
        warmup: run.warmup,
        history: match run.history {
            HistoryArg::Batch => HistorySource::Batch,
            HistoryArg::Cumulative => HistorySource::Cumulative,
        },
        weighting: match run.weighting {
            WeightingArg::Kernel => ProposalWeighting::Kernel,
            WeightingArg::Normalized => ProposalWeighting::Normalized,
        },
        ..AdaptiveConfig::default()
    };
    adaptive.validate()?;
    if run.workers == 0 {
        return Err(Error::InvalidConfig("--workers must be at least 1".into()));
    }
    let sampler = match run.sampler {
        SamplerArg::Uniform => SamplerKind::Uniform,
        SamplerArg::Adaptive => SamplerKind::Adaptive,
    };
    Ok(SolverConfig {
        sampler,
        density: DensityParams::new(k, run.eta)?,
        adaptive,
        uniform: Default::default(),
        budget: run.max_samples,
        workers: run.workers,
    })
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| rand::rng().random())
}

/// Shortest round-trip text, in exponent form for very small or large magnitudes.
fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs()) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| num(x)).collect();
    format!("[{}]", parts.join(","))
}

/// `root=[..] residual=.. samples=.. sigma=[..] seed=..`
pub fn report_line(root: &[f64], residual: f64, samples: usize, sigma: &[f64], seed: u64) -> String {
    format!(
        "root={} residual={} samples={samples} sigma={} seed={seed}",
        vector(root),
        num(residual),
        vector(sigma)
    )
}

fn emit(report: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    write!(out, "{report}")?;
    if let Some(p) = path {
        std::fs::write(p, report)?;
    }
    Ok(())
}

fn write_trace(trace: &ConvergenceTrace, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    trace.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_solve(run: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = resolve_problem(&run.function, run.domain.as_deref(), err)?;
    let cfg = solver_config(run, &p)?;
    let seed = seed_or_entropy(run.seed);
    let outcome = solve(p.field.as_ref(), &p.domain, &cfg, seed)?;
    if let Some(path) = &run.trace {
        write_trace(&ConvergenceTrace::from_run(&outcome, Some(&p)), path)?;
    }
    let residual = p.field.value(&outcome.estimate).abs();
    let line = report_line(&outcome.estimate, residual, outcome.samples_used, &outcome.sigma, seed);
    emit(&format!("{line}\n"), run.report.as_deref(), out)?;
    Ok(if outcome.converged { EXIT_OK } else { EXIT_BUDGET })
}

fn cmd_multiroot(run: &RunArgs, multi: &MultiArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = resolve_problem(&run.function, run.domain.as_deref(), err)?;
    let cfg = solver_config(run, &p)?;
    if cfg.sampler != SamplerKind::Adaptive {
        return Err(Error::InvalidConfig("multi-root search needs the adaptive sampler".into()));
    }
    let mcfg = MultiRootConfig {
        max_roots: multi.max_roots,
        exclusion_radius: multi.exclusion_radius,
        residual_accept: multi.residual_accept,
        adaptive: cfg.adaptive.clone(),
        budget: cfg.budget,
        workers: cfg.workers,
    };
    let seed = seed_or_entropy(run.seed);
    let found = find_all(p.field.as_ref(), &p.domain, cfg.density, &mcfg, seed)?;
    if run.trace.is_some() {
        let _ = writeln!(err, "warning: --trace is ignored for multi-root search");
    }
    let text = multiroot_report(&found, seed);
    emit(&text, run.report.as_deref(), out)?;
    let accepted_unconverged = found
        .rounds
        .iter()
        .filter(|r| r.verdict == RoundVerdict::Accepted)
        .any(|r| r.run.as_ref().is_some_and(|x| !x.converged));
    Ok(if accepted_unconverged { EXIT_BUDGET } else { EXIT_OK })
}

fn multiroot_report(found: &MultiRootOutcome, seed: u64) -> String {
    let mut s = String::new();
    for (r, report) in found.roots.iter().zip(found.rounds.iter()) {
        s += &report_line(&r.location, r.residual, r.samples_used, &r.final_sigma, report.seed);
        s.push('\n');
    }
    let stop = match found.rounds.last().map(|r| r.verdict) {
        Some(RoundVerdict::Accepted) | None => "max-roots",
        Some(RoundVerdict::Rejected) => "residual",
        Some(RoundVerdict::Repeated) => "repeated",
        Some(RoundVerdict::Saturated) => "saturated",
    };
    s += &format!("roots={} rounds={} stop={stop} seed={seed}\n", found.roots.len(), found.rounds.len());
    s
}

/// Parses `1,2,3` or `a..b`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidConfig(format!("malformed seed list `{text}`"));
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..b).collect()
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("the seed list is empty".into()));
    }
    Ok(seeds)
}

fn cmd_experiment(
    run: &RunArgs,
    seeds: &str,
    fit: Option<FitArg>,
    etas: &[f64],
    trace_dir: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let p = resolve_problem(&run.function, run.domain.as_deref(), err)?;
    let cfg = solver_config(run, &p)?;
    let seeds = parse_seeds(seeds)?;
    if run.seed.is_some() {
        let _ = writeln!(err, "warning: --seed is ignored by experiment; use --seeds");
    }
    let exp = run_experiment(&p, &cfg, &seeds)?;
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)?;
        for t in &exp.traces {
            let seed = t.seed.expect("runs record their seed");
            write_trace(t, &dir.join(format!("trace_seed{seed}.csv")))?;
        }
    }

    let mut s = String::new();
    for t in &exp.traces {
        let last = t.rows.last();
        s += &format!(
            "seed={} root={} samples={} error={}\n",
            t.seed.expect("runs record their seed"),
            vector(last.map_or(&[][..], |r| &r.estimate)),
            last.map_or(0, |r| r.samples),
            last.and_then(|r| r.error).map_or("n/a".into(), num),
        );
    }
    for (seed, e) in &exp.failures {
        s += &format!("seed={seed} failed: {e}\n");
    }
    if let Some(m) = median(exp.final_errors()) {
        s += &format!("median_error={} runs={} failed={}\n", num(m), exp.traces.len(), exp.failures.len());
    }
    if let Some(model) = fit {
        let model = match model {
            FitArg::Power => RateModel::Power,
            FitArg::Exponential => RateModel::Exponential,
        };
        s += &fit_rate(&exp.traces, model)?.to_json();
        s.push('\n');
    }
    if !etas.is_empty() {
        for (eta, floor) in eta_floor(&p, etas, &cfg, &seeds)? {
            s += &format!("eta={} floor_error={}\n", num(eta), num(floor));
        }
    }
    emit(&s, run.report.as_deref(), out)?;
    Ok(if exp.failures.is_empty() { EXIT_OK } else { EXIT_ERROR })
}
