//! The experiment subcommands. Each builds one Gaussian system from the
//! seed, runs its trials and writes CSV tables plus `manifest.txt` into an
//! output directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use kaczmarz_core::{LinearSystem, SchemeKind, SpectralInfo};

use crate::experiments::{
    alpha_sweep, bound_sweep, default_alpha_grid, gen_system, run_trials, system_rng, BoundSpec,
    SweepSpec, TrialSpec,
};
use crate::io::{fmt_real, Cell, Provenance, Table};
use crate::{Error, Result};

pub const TRACE_HEADER: [&str; 4] = ["iteration", "mean_sq_err", "p05", "p95"];
pub const SWEEP_HEADER: [&str; 7] = [
    "q",
    "alpha",
    "mean_sq_err",
    "p05",
    "p95",
    "alpha_star",
    "alpha_rt",
];
pub const BOUND_HEADER: [&str; 3] = ["alpha", "bound", "empirical_mean"];
pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Error traces for several thread counts on an inconsistent system.
    Threads,
    /// Error traces for several relaxations on an inconsistent system.
    Alpha,
    /// Final error against relaxation on a consistent system.
    AlphaSweep,
    /// Predicted bound against empirical final error on a consistent system.
    Bounds,
}

impl Figure {
    pub const ALL: [Figure; 4] = [
        Figure::Threads,
        Figure::Alpha,
        Figure::AlphaSweep,
        Figure::Bounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Threads => "fig-threads",
            Figure::Alpha => "fig-alpha",
            Figure::AlphaSweep => "fig-alpha-sweep",
            Figure::Bounds => "fig-bounds",
        }
    }

    pub fn consistent(self) -> bool {
        matches!(self, Figure::AlphaSweep | Figure::Bounds)
    }

    pub fn default_threads(self) -> Vec<usize> {
        match self {
            Figure::Threads => vec![1, 10, 100],
            Figure::Alpha => vec![10],
            Figure::AlphaSweep => vec![5, 10, 25, 100],
            Figure::Bounds => vec![10, 100],
        }
    }

    pub fn default_alphas(self) -> Vec<f64> {
        match self {
            Figure::Threads => vec![1.0],
            Figure::Alpha => vec![0.25, 0.5, 1.0, 2.0, 4.0],
            Figure::AlphaSweep | Figure::Bounds => default_alpha_grid(),
        }
    }

    pub fn default_iterations(self) -> usize {
        match self {
            Figure::Threads | Figure::Alpha => 500,
            Figure::AlphaSweep | Figure::Bounds => 50,
        }
    }

    pub fn default_schemes(self) -> Vec<SchemeKind> {
        match self {
            Figure::Threads | Figure::Bounds => vec![SchemeKind::UniformWeightsRowNormProbs],
            Figure::Alpha | Figure::AlphaSweep => vec![
                SchemeKind::UniformWeightsRowNormProbs,
                SchemeKind::RowNormWeightsUniformProbs,
            ],
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Overrides for a figure; `None` selects the figure's default.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub iterations: Option<usize>,
    pub threads: Option<Vec<usize>>,
    pub alphas: Option<Vec<f64>>,
    pub schemes: Option<Vec<SchemeKind>>,
    pub parallel: bool,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            m: 100,
            n: 10,
            trials: 100,
            iterations: None,
            threads: None,
            alphas: None,
            schemes: None,
            parallel: true,
        }
    }
}

struct Plan {
    figure: Figure,
    seed: u64,
    trials: usize,
    iterations: usize,
    threads: Vec<usize>,
    alphas: Vec<f64>,
    schemes: Vec<SchemeKind>,
    parallel: bool,
    system: LinearSystem,
    info: SpectralInfo,
}

impl Plan {
    fn new(figure: Figure, opts: &FigureOptions) -> Result<Self> {
        let threads = opts
            .threads
            .clone()
            .unwrap_or_else(|| figure.default_threads());
        let alphas = opts
            .alphas
            .clone()
            .unwrap_or_else(|| figure.default_alphas());
        let schemes = opts
            .schemes
            .clone()
            .unwrap_or_else(|| figure.default_schemes());
        if threads.is_empty() || alphas.is_empty() || schemes.is_empty() {
            return Err(Error::Invalid("empty thread, alpha or scheme list".into()));
        }
        if figure == Figure::Threads && alphas.len() != 1 {
            return Err(Error::Invalid(format!("{figure} takes a single alpha")));
        }
        if figure == Figure::Alpha && threads.len() != 1 {
            return Err(Error::Invalid(format!(
                "{figure} takes a single thread count"
            )));
        }
        if figure == Figure::Bounds && schemes != [SchemeKind::UniformWeightsRowNormProbs] {
            return Err(Error::Invalid(format!(
                "{figure} supports only {}",
                SchemeKind::UniformWeightsRowNormProbs
            )));
        }
        let system = gen_system(
            opts.m,
            opts.n,
            figure.consistent(),
            &mut system_rng(opts.seed),
        )?;
        let info = system.a.spectral_info()?;
        Ok(Self {
            figure,
            seed: opts.seed,
            trials: opts.trials,
            iterations: opts
                .iterations
                .unwrap_or_else(|| figure.default_iterations()),
            threads,
            alphas,
            schemes,
            parallel: opts.parallel,
            system,
            info,
        })
    }

    fn provenance(&self) -> Provenance {
        Provenance::new(self.seed, self.system.rows(), self.system.cols())
            .with("experiment", self.figure)
            .with("consistent", self.figure.consistent())
            .with("iters", self.iterations)
            .with("trials", self.trials)
            .with("s_min", fmt_real(self.info.s_min))
            .with("s_max", fmt_real(self.info.s_max))
    }

    fn trace_table(&self, kind: SchemeKind, q: usize, alpha: f64) -> Result<Table> {
        let spec = TrialSpec {
            kind,
            alpha,
            threads: q,
            iterations: self.iterations,
            trials: self.trials,
            base_seed: self.seed,
            parallel: self.parallel,
            error_coordinates: false,
        };
        let stats = run_trials(&self.system, &spec)?;
        let provenance = self
            .provenance()
            .with("scheme", kind)
            .with("q", q)
            .with("alpha", alpha);
        let mut table = Table::new(provenance, &TRACE_HEADER);
        for k in 0..=stats.iterations {
            table.push(vec![
                Cell::from(k),
                stats.mean_sq_err[k].into(),
                stats.p05[k].into(),
                stats.p95[k].into(),
            ])?;
        }
        Ok(table)
    }

    fn tables(&self) -> Result<Vec<(String, Table)>> {
        let mut out = Vec::new();
        match self.figure {
            Figure::Threads => {
                for &kind in &self.schemes {
                    for &q in &self.threads {
                        let table = self.trace_table(kind, q, self.alphas[0])?;
                        out.push((format!("threads_{kind}_q{q}.csv"), table));
                    }
                }
            }
            Figure::Alpha => {
                for &kind in &self.schemes {
                    for &alpha in &self.alphas {
                        let table = self.trace_table(kind, self.threads[0], alpha)?;
                        out.push((format!("alpha_{kind}_a{alpha}.csv"), table));
                    }
                }
            }
            Figure::AlphaSweep => {
                for &kind in &self.schemes {
                    let spec = SweepSpec {
                        kind,
                        threads: self.threads.clone(),
                        alphas: self.alphas.clone(),
                        iterations: self.iterations,
                        trials: self.trials,
                        base_seed: self.seed,
                        parallel: self.parallel,
                    };
                    let mut table =
                        Table::new(self.provenance().with("scheme", kind), &SWEEP_HEADER);
                    for r in alpha_sweep(&self.system, &spec)? {
                        table.push(vec![
                            r.q.into(),
                            r.alpha.into(),
                            r.mean_sq_err.into(),
                            r.p05.into(),
                            r.p95.into(),
                            r.alpha_star.into(),
                            r.alpha_rt.into(),
                        ])?;
                    }
                    out.push((format!("sweep_{kind}.csv"), table));
                }
            }
            Figure::Bounds => {
                for &q in &self.threads {
                    let spec = BoundSpec {
                        threads: q,
                        alphas: self.alphas.clone(),
                        iterations: self.iterations,
                        trials: self.trials,
                        base_seed: self.seed,
                        parallel: self.parallel,
                    };
                    let provenance = self
                        .provenance()
                        .with("scheme", SchemeKind::UniformWeightsRowNormProbs)
                        .with("q", q);
                    let mut table = Table::new(provenance, &BOUND_HEADER);
                    for r in bound_sweep(&self.system, &spec)? {
                        table.push(vec![
                            r.alpha.into(),
                            r.bound.into(),
                            r.empirical_mean.into(),
                        ])?;
                    }
                    out.push((format!("bounds_q{q}.csv"), table));
                }
            }
        }
        Ok(out)
    }
}

/// Runs `figure` and writes its tables and manifest into `out_dir`
/// (created if missing). Returns the written paths, manifest last.
pub fn run_figure(figure: Figure, opts: &FigureOptions, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let plan = Plan::new(figure, opts)?;
    let tables = plan.tables()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = format!("{}\n", plan.provenance().render());
    let mut written = Vec::with_capacity(tables.len() + 1);
    for (name, table) in &tables {
        let path = out_dir.join(name);
        table.write(&path)?;
        manifest.push_str(name);
        manifest.push('\n');
        written.push(path);
    }
    let path = out_dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
