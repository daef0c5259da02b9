//! Command-line interface.
//!
//! Usage errors exit with status 2 (reported by clap, naming the flag);
//! computation errors exit with status 1 and print the error name on
//! standard error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use kaczmarz_core::linalg::{least_squares, norm_sq, residual};
use kaczmarz_core::solver::{solve, solve_rk, SolverConfig};
use kaczmarz_core::theory::{
    horizon_uniform, optimal_alpha, rate_consistent_general, rate_general_matrix, rt_alpha,
};
use kaczmarz_core::{BoundReport, Coupling, LinearSystem, SamplingScheme, SchemeKind};

use crate::experiments::alpha_grid;
use crate::figures::{run_figure, Figure, FigureOptions};
use crate::io::{self, Cell, Provenance, Table};
use crate::{Error, Result};

/// Residuals at most this fraction of `‖b‖` count as a consistent system.
pub const CONSISTENT_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "kaczmarz",
    version,
    about = "Randomized Kaczmarz with averaging"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a system read from CSV files.
    Solve(SolveArgs),
    /// Print the convergence rate and horizon for a system and scheme.
    Bounds(BoundsArgs),
    /// Print the optimal relaxation and the baseline `q / (1 + (q − 1) s_max)`.
    Alpha(AlphaArgs),
    /// Regenerate an experiment as CSV files.
    Experiment(ExperimentArgs),
}

fn parse_threads(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(q) if q >= 1 => Ok(q),
        _ => Err(format!("expected an integer >= 1, got `{s}`")),
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn parse_nonnegative(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got `{s}`")),
    }
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = SchemeKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown scheme `{s}`; expected one of {}", names.join(", "))
    })
}

/// An evenly spaced relaxation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid(pub Vec<f64>);

/// `start:stop:step`.
fn parse_grid(s: &str) -> std::result::Result<AlphaGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(format!("expected start:stop:step, got `{s}`"));
    };
    let start = parse_positive(start)?;
    let stop = parse_positive(stop)?;
    let step = parse_positive(step)?;
    alpha_grid(start, stop, step)
        .map(AlphaGrid)
        .map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Matrix CSV, one row per line.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Right-hand side CSV (one column or one row).
    #[arg(long)]
    pub rhs: PathBuf,
    /// Known least-squares solution, enables the error trace.
    #[arg(long)]
    pub x_star: Option<PathBuf>,
    /// Rows averaged per iteration (q).
    #[arg(long, default_value_t = 1, value_parser = parse_threads)]
    pub threads: usize,
    /// Iterations (K).
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub alpha: f64,
    #[arg(long, default_value = "uniform-w-rownorm-p", value_parser = parse_scheme)]
    pub scheme: SchemeKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the per-iteration trace to this CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the final iterate here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run plain relaxed RK with this relaxation (requires --threads 1).
    #[arg(long, value_parser = parse_positive)]
    pub lambda: Option<f64>,
    /// Stop early once ‖b − Ax‖ falls to this value.
    #[arg(long, value_parser = parse_nonnegative)]
    pub tol: Option<f64>,
    /// Compute the rows of each step concurrently.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Right-hand side; without it the system is taken as consistent.
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = parse_threads)]
    pub threads: usize,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub alpha: f64,
    #[arg(long, default_value = "uniform-w-rownorm-p", value_parser = parse_scheme)]
    pub scheme: SchemeKind,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    /// Smallest normalized squared singular value.
    #[arg(long, value_parser = parse_positive, requires = "smax", conflicts_with = "matrix")]
    pub smin: Option<f64>,
    /// Largest normalized squared singular value.
    #[arg(long, value_parser = parse_positive, requires = "smin")]
    pub smax: Option<f64>,
    /// Take the spectrum from this matrix instead.
    #[arg(long, required_unless_present = "smin")]
    pub matrix: Option<PathBuf>,
    #[arg(long, value_parser = parse_threads)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FigureName {
    FigThreads,
    FigAlpha,
    FigAlphaSweep,
    FigBounds,
}

impl From<FigureName> for Figure {
    fn from(f: FigureName) -> Self {
        match f {
            FigureName::FigThreads => Figure::Threads,
            FigureName::FigAlpha => Figure::Alpha,
            FigureName::FigAlphaSweep => Figure::AlphaSweep,
            FigureName::FigBounds => Figure::Bounds,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub figure: FigureName,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100, value_parser = parse_threads)]
    pub m: usize,
    #[arg(long, default_value_t = 10, value_parser = parse_threads)]
    pub n: usize,
    #[arg(long, default_value_t = 100, value_parser = parse_threads)]
    pub trials: usize,
    /// Iterations (K); defaults to 500 for traces and 50 for sweeps.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Comma-separated thread counts.
    #[arg(long, value_delimiter = ',', value_parser = parse_threads)]
    pub threads: Option<Vec<usize>>,
    /// Comma-separated relaxation values.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive, conflicts_with = "alpha_grid")]
    pub alpha: Option<Vec<f64>>,
    /// Relaxation grid as start:stop:step.
    #[arg(long, value_parser = parse_grid)]
    pub alpha_grid: Option<AlphaGrid>,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    pub scheme: Option<Vec<SchemeKind>>,
    /// Disable solver-internal parallelism.
    #[arg(long)]
    pub sequential: bool,
}

impl Cli {
    /// Parses and applies the cross-flag checks clap cannot express.
    pub fn try_parse_checked<I, T>(args: I) -> std::result::Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args)?;
        if let Command::Solve(s) = &cli.command {
            if s.lambda.is_some() && s.threads != 1 {
                return Err(Cli::command().error(
                    clap::error::ErrorKind::ArgumentConflict,
                    "--lambda runs plain RK and requires --threads 1",
                ));
            }
        }
        Ok(cli)
    }
}

/// Two-decimal display of a relaxation parameter.
pub fn fmt_alpha(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn coupling_warning(scheme: &SamplingScheme) -> Option<String> {
    match scheme.check_coupling() {
        Coupling::Holds(_) => None,
        Coupling::Violated { index, deviation } => Some(format!(
            "warning: weights and probabilities are not coupled (row {index}, relative deviation \
             {deviation:.3e}); iterates approach a weighted least-squares solution"
        )),
    }
}

fn run_solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let a = io::read_matrix(&args.matrix)?;
    let b = io::read_vector(&args.rhs)?;
    let mut system = LinearSystem::new(a, b)?;
    if let Some(path) = &args.x_star {
        system = system.with_solution(io::read_vector(path)?, None)?;
    }
    let scheme = SamplingScheme::from_kind(args.scheme, args.alpha, &system.a)?;
    if args.lambda.is_none() {
        if let Some(msg) = coupling_warning(&scheme) {
            writeln!(err, "{msg}").map_err(|e| Error::io("<stderr>", e))?;
        }
    }
    let mut config = SolverConfig::new(args.threads, args.iters, args.seed);
    config.record_trace = args.trace.is_some() && system.x_star.is_some();
    config.record_residual = args.trace.is_some();
    config.tolerance = args.tol;
    config.parallel = args.parallel;
    let result = match args.lambda {
        Some(lambda) => {
            config.lambda = lambda;
            solve_rk(&system, &scheme, &config)?
        }
        None => solve(&system, &scheme, &config)?,
    };

    if let Some(path) = &args.trace {
        let mut provenance = Provenance::new(args.seed, system.rows(), system.cols())
            .with("command", "solve")
            .with("scheme", args.scheme)
            .with("q", args.threads)
            .with("iters", args.iters);
        provenance = match args.lambda {
            Some(l) => provenance.with("lambda", l),
            None => provenance.with("alpha", args.alpha),
        };
        let mut header = vec!["iteration", "sq_residual"];
        if config.record_trace {
            header.push("sq_err");
        }
        let mut table = Table::new(provenance, &header);
        for k in 0..=result.iterations {
            let mut row = vec![Cell::from(k), result.sq_residuals[k].into()];
            if config.record_trace {
                row.push(result.sq_errors[k].into());
            }
            table.push(row)?;
        }
        table.write(path)?;
    }

    let r = residual(&system.a, &result.final_iterate, &system.b)?;
    writeln!(
        err,
        "iterations={} residual_norm={} stopped_early={}",
        result.iterations,
        norm_sq(&r).sqrt(),
        result.stopped_early
    )
    .map_err(|e| Error::io("<stderr>", e))?;
    match &args.out {
        Some(path) => io::write_vector(path, &result.final_iterate),
        None => out
            .write_all(io::format_vector(&result.final_iterate).as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Rate and horizon for the given system and scheme. The residual `r⋆` is
/// recovered by least squares when a right-hand side is present.
pub fn bounds_report(
    matrix: &Path,
    rhs: Option<&Path>,
    kind: SchemeKind,
    alpha: f64,
    q: usize,
) -> Result<BoundReport> {
    let a = io::read_matrix(matrix)?;
    let scheme = SamplingScheme::from_kind(kind, alpha, &a)?;
    scheme.require_coupling()?;
    let r_star_sq = match rhs {
        None => 0.0,
        Some(path) => {
            let b = io::read_vector(path)?;
            let x = least_squares(&a, &b)?;
            let r = residual(&a, &x, &b)?;
            let r_sq = norm_sq(&r);
            if r_sq <= CONSISTENT_TOL * CONSISTENT_TOL * b.norm_sq() {
                0.0
            } else {
                r_sq
            }
        }
    };
    match kind {
        SchemeKind::UniformWeightsRowNormProbs => {
            Ok(horizon_uniform(&a.spectral_info()?, alpha, q, r_star_sq)?)
        }
        _ if r_star_sq == 0.0 => Ok(BoundReport::new(
            rate_consistent_general(&a, &scheme, q)?,
            0.0,
        )),
        // The additive term depends on every iterate's residual, so only
        // the contraction factor is available.
        _ => Ok(BoundReport {
            rate: rate_general_matrix(&a, alpha, q)?,
            horizon_step: f64::NAN,
            horizon_limit: None,
        }),
    }
}

fn run_bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let report = bounds_report(
        &args.matrix,
        args.rhs.as_deref(),
        args.scheme,
        args.alpha,
        args.threads,
    )?;
    let step = (!report.horizon_step.is_nan()).then_some(report.horizon_step);
    writeln!(
        out,
        "rate={} horizon_step={} horizon_limit={}",
        report.rate,
        fmt_opt(step),
        fmt_opt(report.horizon_limit)
    )
    .map_err(|e| Error::io("<stdout>", e))
}

fn run_alpha(args: &AlphaArgs, out: &mut dyn Write) -> Result<()> {
    let (s_min, s_max) = match (args.smin, args.smax, &args.matrix) {
        (Some(lo), Some(hi), _) => (lo, hi),
        (_, _, Some(path)) => {
            let info = io::read_matrix(path)?.spectral_info()?;
            (info.s_min, info.s_max)
        }
        _ => return Err(Error::Invalid("give --smin and --smax, or --matrix".into())),
    };
    let star = optimal_alpha(s_min, s_max, args.threads)?;
    let rt = rt_alpha(s_max, args.threads)?;
    writeln!(
        out,
        "alpha_star={} alpha_rt={}",
        fmt_alpha(star),
        fmt_alpha(rt)
    )
    .map_err(|e| Error::io("<stdout>", e))
}

fn run_experiment(args: &ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let opts = FigureOptions {
        seed: args.seed,
        m: args.m,
        n: args.n,
        trials: args.trials,
        iterations: args.iters,
        threads: args.threads.clone(),
        alphas: args
            .alpha
            .clone()
            .or_else(|| args.alpha_grid.clone().map(|g| g.0)),
        schemes: args.scheme.clone(),
        parallel: !args.sequential,
    };
    for path in run_figure(args.figure.into(), &opts, &args.out)? {
        writeln!(out, "{}", path.display()).map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

/// Executes a parsed command.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => run_solve(a, out, err),
        Command::Bounds(a) => run_bounds(a, out),
        Command::Alpha(a) => run_alpha(a, out),
        Command::Experiment(a) => run_experiment(a, out),
    }
}

/// Full entry point; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_checked(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    match run(&cli, &mut stdout, &mut stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}: {e}", e.name());
            1
        }
    }
}
