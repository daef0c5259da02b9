//! Gaussian test systems, multi-trial runs and parameter sweeps.
//!
//! Every experiment fixes one system and runs independent trials on it;
//! trial `t` draws its rows from the seed `base_seed + t`. Trials run
//! concurrently and are aggregated in trial order, so results depend only
//! on the seeds.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use kaczmarz_core::linalg::{error_sq, least_squares, norm_sq, residual};
use kaczmarz_core::solver::{solve, solve_from, SolverConfig};
use kaczmarz_core::theory::{horizon_uniform, optimal_alpha, rt_alpha};
use kaczmarz_core::{
    DenseMatrix, LinearSystem, RealVector, SamplingScheme, SchemeKind, SolverRng, SpectralInfo,
};

use crate::{Error, Result};

/// Draws beyond the first when a generated matrix is rank deficient.
pub const GEN_RETRIES: usize = 3;

/// Generator for test systems. Uses a different ChaCha stream than the
/// trial generators, so a system seed never aliases a trial seed.
pub fn system_rng(seed: u64) -> SolverRng {
    let mut rng = SolverRng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn gaussian_vec<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let norm = norm_sq(v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Removes the range-of-`A` component of `v`.
fn project_out_range(a: &DenseMatrix, v: &mut [f64]) -> Result<()> {
    let coef = least_squares(a, v)?;
    let fitted = a.matvec(&coef)?;
    v.iter_mut().zip(&fitted).for_each(|(vi, fi)| *vi -= fi);
    Ok(())
}

fn try_gen<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    consistent: bool,
    rng: &mut R,
) -> Result<LinearSystem> {
    let a = DenseMatrix::new(m, n, gaussian_vec(m * n, rng))?;
    a.spectral_info()?;
    let mut x_star = gaussian_vec(n, rng);
    normalize(&mut x_star);
    let mut r_star = vec![0.0; m];
    if !consistent {
        r_star = gaussian_vec(m, rng);
        project_out_range(&a, &mut r_star)?;
        // A second pass removes what rounding left in the range.
        project_out_range(&a, &mut r_star)?;
        normalize(&mut r_star);
    }
    let mut b = a.matvec(&x_star)?;
    b.iter_mut().zip(&r_star).for_each(|(bi, ri)| *bi += ri);
    let system = LinearSystem::new(a, RealVector::try_from(b)?)?;
    Ok(system.with_solution(
        RealVector::try_from(x_star)?,
        Some(RealVector::try_from(r_star)?),
    )?)
}

/// A standard Gaussian `m × n` system with `‖x⋆‖ = 1` and, when
/// inconsistent, a unit residual orthogonal to the range of `A`.
pub fn gen_system<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    consistent: bool,
    rng: &mut R,
) -> Result<LinearSystem> {
    if !(m > n && n >= 1) {
        return Err(Error::Invalid(format!("need m > n >= 1, got m={m}, n={n}")));
    }
    let mut attempt = 0;
    loop {
        match try_gen(m, n, consistent, rng) {
            Err(Error::Core(kaczmarz_core::Error::RankDeficient { .. }))
                if attempt < GEN_RETRIES =>
            {
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Parameters of a batch of independent runs on one system.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub kind: SchemeKind,
    pub alpha: f64,
    pub threads: usize,
    pub iterations: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// Solver-internal parallelism within each step.
    pub parallel: bool,
    /// Iterate on the error system `A e = r⋆` from `e⁰ = −x⋆` instead of on
    /// `A x = b` from `x⁰ = 0`. The method commutes with this shift, so
    /// both runs visit the same rows, but errors formed as `x − x⋆` cannot
    /// resolve values below about `(ε ‖x⋆‖)²`.
    pub error_coordinates: bool,
}

impl TrialSpec {
    pub fn new(kind: SchemeKind, alpha: f64, threads: usize, iterations: usize) -> Self {
        Self {
            kind,
            alpha,
            threads,
            iterations,
            trials: 100,
            base_seed: 0,
            parallel: true,
            error_coordinates: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Invalid("trials must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Invalid(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn config(&self, trial: usize, record_trace: bool) -> SolverConfig {
        let mut config = SolverConfig::new(
            self.threads,
            self.iterations,
            self.base_seed.wrapping_add(trial as u64),
        );
        config.record_trace = record_trace;
        config.parallel = self.parallel;
        config
    }
}

/// Per-iteration aggregate of `‖x^k − x⋆‖²` over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub iterations: usize,
    pub mean_sq_err: Vec<f64>,
    pub p05: Vec<f64>,
    pub p95: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl TrialStats {
    /// Mean of the last `window` entries of the mean curve.
    pub fn plateau(&self, window: usize) -> f64 {
        let window = window.clamp(1, self.mean_sq_err.len());
        let tail = &self.mean_sq_err[self.mean_sq_err.len() - window..];
        tail.iter().sum::<f64>() / window as f64
    }
}

/// Nearest-rank percentile of sorted data: the value at rank `⌈p N / 100⌉`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p / 100.0 * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

struct Summary {
    mean: f64,
    p05: f64,
    p95: f64,
}

fn summarize(samples: &mut [f64]) -> Summary {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(f64::total_cmp);
    Summary {
        mean,
        p05: percentile(samples, 5.0),
        p95: percentile(samples, 95.0),
    }
}

fn x_star(system: &LinearSystem) -> Result<&[f64]> {
    system
        .x_star
        .as_deref()
        .ok_or_else(|| Error::Invalid("the system has no reference solution".into()))
}

/// The system `A e = r⋆` with solution `0`, and the start `−x⋆`.
fn error_system(system: &LinearSystem) -> Result<(LinearSystem, Vec<f64>)> {
    let target = x_star(system)?;
    let r_star = match &system.r_star {
        Some(r) => r.to_vec(),
        None => residual(&system.a, target, &system.b)?,
    };
    let shifted = LinearSystem::new(system.a.clone(), RealVector::try_from(r_star.clone())?)?
        .with_solution(
            RealVector::zeros(system.cols()),
            Some(RealVector::try_from(r_star)?),
        )?;
    Ok((shifted, target.iter().map(|v| -v).collect()))
}

/// Runs `spec.trials` solves from `x⁰ = 0` and aggregates their error traces.
pub fn run_trials(system: &LinearSystem, spec: &TrialSpec) -> Result<TrialStats> {
    spec.validate()?;
    x_star(system)?;
    let scheme = SamplingScheme::from_kind(spec.kind, spec.alpha, &system.a)?;
    let (system, x0) = if spec.error_coordinates {
        let (shifted, x0) = error_system(system)?;
        (std::borrow::Cow::Owned(shifted), x0)
    } else {
        (std::borrow::Cow::Borrowed(system), vec![0.0; system.cols()])
    };
    let traces = (0..spec.trials)
        .into_par_iter()
        .map(|t| Ok(solve_from(&system, &scheme, &spec.config(t, true), x0.clone())?.sq_errors))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let len = spec.iterations + 1;
    let mut stats = TrialStats {
        iterations: spec.iterations,
        mean_sq_err: Vec::with_capacity(len),
        p05: Vec::with_capacity(len),
        p95: Vec::with_capacity(len),
        trials: spec.trials,
        seed: spec.base_seed,
    };
    let mut column = vec![0.0; spec.trials];
    for k in 0..len {
        column
            .iter_mut()
            .zip(&traces)
            .for_each(|(c, tr)| *c = tr[k]);
        let s = summarize(&mut column);
        stats.mean_sq_err.push(s.mean);
        stats.p05.push(s.p05);
        stats.p95.push(s.p95);
    }
    Ok(stats)
}

/// `‖x^K − x⋆‖²` of every trial, in trial order.
pub fn final_errors(system: &LinearSystem, spec: &TrialSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let target = x_star(system)?;
    let scheme = SamplingScheme::from_kind(spec.kind, spec.alpha, &system.a)?;
    (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let trace = solve(system, &scheme, &spec.config(t, false))?;
            Ok(error_sq(&trace.final_iterate, target)?)
        })
        .collect()
}

fn check_grid(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::Invalid("empty alpha grid".into()));
    }
    if alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::Invalid("alpha grid values must be positive".into()));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(
            "alpha grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `start, start + step, ...` up to `stop` (inclusive, up to rounding).
/// Points are computed as `start + i·step` so they do not accumulate error.
pub fn alpha_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start > 0.0 && step > 0.0 && stop >= start && stop.is_finite()) {
        return Err(Error::Invalid(format!(
            "invalid grid start={start} stop={stop} step={step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// The default relaxation grid: 0.25 to 12 in steps of 0.25.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=48).map(|i| 0.25 * i as f64).collect()
}

/// Relaxation sweep over thread counts and a grid of `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SchemeKind,
    pub threads: Vec<usize>,
    pub alphas: Vec<f64>,
    pub iterations: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub parallel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub q: usize,
    pub alpha: f64,
    pub mean_sq_err: f64,
    pub p05: f64,
    pub p95: f64,
    pub alpha_star: f64,
    pub alpha_rt: f64,
}

/// Final-error statistics for every `(q, α)` cell, plus the two
/// relaxation formulas evaluated from the system's spectrum.
pub fn alpha_sweep(system: &LinearSystem, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.iterations == 0 {
        return Err(Error::Invalid("sweeps need at least one iteration".into()));
    }
    check_grid(&spec.alphas)?;
    let info = system.a.spectral_info()?;
    let mut rows = Vec::with_capacity(spec.threads.len() * spec.alphas.len());
    for &q in &spec.threads {
        let alpha_star = optimal_alpha(info.s_min, info.s_max, q)?;
        let alpha_rt = rt_alpha(info.s_max, q)?;
        for &alpha in &spec.alphas {
            let trial = TrialSpec {
                kind: spec.kind,
                alpha,
                threads: q,
                iterations: spec.iterations,
                trials: spec.trials,
                base_seed: spec.base_seed,
                parallel: spec.parallel,
                error_coordinates: false,
            };
            let s = summarize(&mut final_errors(system, &trial)?);
            rows.push(SweepRow {
                q,
                alpha,
                mean_sq_err: s.mean,
                p05: s.p05,
                p95: s.p95,
                alpha_star,
                alpha_rt,
            });
        }
    }
    Ok(rows)
}

/// The grid `α` with the smallest mean final error for thread count `q`.
pub fn empirical_argmin(rows: &[SweepRow], q: usize) -> Option<f64> {
    rows.iter()
        .filter(|r| r.q == q)
        .min_by(|a, b| a.mean_sq_err.total_cmp(&b.mean_sq_err))
        .map(|r| r.alpha)
}

/// Iterated uniform-weight bound on `‖x^k − x⋆‖²` from `x⁰ = 0`, for
/// `k = 0..=iterations`.
pub fn bound_trajectory(
    system: &LinearSystem,
    info: &SpectralInfo,
    alpha: f64,
    q: usize,
    iterations: usize,
) -> Result<Vec<f64>> {
    let e0 = norm_sq(x_star(system)?);
    let report = horizon_uniform(info, alpha, q, system.r_star_norm_sq())?;
    Ok(report.trajectory(e0, iterations))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSpec {
    pub threads: usize,
    pub alphas: Vec<f64>,
    pub iterations: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub parallel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub alpha: f64,
    pub bound: f64,
    pub empirical_mean: f64,
}

/// Predicted bound on `‖x^K − x⋆‖²` next to the empirical mean, for each
/// `α`, under uniform weights with row-norm probabilities.
pub fn bound_sweep(system: &LinearSystem, spec: &BoundSpec) -> Result<Vec<BoundRow>> {
    check_grid(&spec.alphas)?;
    let info = system.a.spectral_info()?;
    spec.alphas
        .iter()
        .map(|&alpha| {
            let bound = bound_trajectory(system, &info, alpha, spec.threads, spec.iterations)?;
            let trial = TrialSpec {
                kind: SchemeKind::UniformWeightsRowNormProbs,
                alpha,
                threads: spec.threads,
                iterations: spec.iterations,
                trials: spec.trials,
                base_seed: spec.base_seed,
                parallel: spec.parallel,
                error_coordinates: false,
            };
            let errors = final_errors(system, &trial)?;
            Ok(BoundRow {
                alpha,
                bound: bound[spec.iterations],
                empirical_mean: errors.iter().sum::<f64>() / errors.len() as f64,
            })
        })
        .collect()
}
