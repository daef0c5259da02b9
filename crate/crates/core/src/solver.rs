//! Relaxed randomized Kaczmarz and randomized Kaczmarz with averaging.
//!
//! One averaged iteration draws `q` row indices `τ_k` with replacement and
//! applies
//!
//! ```text
//! x ← x − (1/q) Σ_{i∈τ_k} w_i (A_i x − b_i) / ‖A_i‖² · A_iᵀ
//! ```
//!
//! The indices are always drawn sequentially from the generator. With the
//! `parallel` feature the `q` row coefficients may be computed on the rayon
//! pool, but the sum over `τ_k` is accumulated in batch order, so the
//! result never depends on scheduling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{axpy, check_len, dot, error_sq, norm_sq, residual, DenseMatrix};
use crate::sampling::{SampleBatch, SamplingScheme};
use crate::system::LinearSystem;
use crate::{rng_from_seed, SolverRng};

/// Iteration parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Rows averaged per iteration (`q`, the number of threads).
    pub threads: usize,
    /// Iteration cap `K`.
    pub iterations: usize,
    /// Relaxation for plain RK only; averaged runs use the scheme weights.
    pub lambda: f64,
    pub seed: u64,
    /// Record `‖x^k − x⋆‖²` for every iterate (needs `x⋆`).
    pub record_trace: bool,
    /// Record `‖b − A x^k‖²` for every iterate.
    pub record_residual: bool,
    /// Stop once `‖b − A x^k‖ ≤ tolerance`. Not part of the method itself.
    pub tolerance: Option<f64>,
    /// Compute the per-row coefficients of a step concurrently.
    pub parallel: bool,
}

impl SolverConfig {
    pub fn new(threads: usize, iterations: usize, seed: u64) -> Self {
        Self {
            threads,
            iterations,
            lambda: 1.0,
            seed,
            record_trace: true,
            record_residual: false,
            tolerance: None,
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::InvalidParameter(
                "thread count must be at least 1".into(),
            ));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "relaxation must be positive, got {}",
                self.lambda
            )));
        }
        if let Some(tol) = self.tolerance {
            if !(tol >= 0.0) {
                return Err(Error::InvalidParameter(format!("tolerance {tol}")));
            }
        }
        Ok(())
    }
}

/// Per-iteration history of one run. Traces that were recorded have
/// `iterations + 1` entries (iterate 0 included).
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub sq_errors: Vec<f64>,
    pub sq_residuals: Vec<f64>,
    pub final_iterate: Vec<f64>,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Set when the residual tolerance ended the run before `K`.
    pub stopped_early: bool,
}

/// One relaxed RK step onto row `i`:
/// `x − λ (A_i x − b_i) / ‖A_i‖² · A_iᵀ`.
pub fn rk_step(a: &DenseMatrix, b: &[f64], x: &[f64], i: usize, lambda: f64) -> Result<Vec<f64>> {
    check_len("right-hand side", a.rows(), b.len())?;
    check_len("iterate", a.cols(), x.len())?;
    if i >= a.rows() {
        return Err(Error::InvalidParameter(format!(
            "row index {i} out of range"
        )));
    }
    let row = a.row(i);
    let ns = norm_sq(row);
    if !(ns > 0.0) {
        return Err(Error::ZeroRow { row: i });
    }
    let mut out = x.to_vec();
    let coef = lambda * ((dot(row, x) - b[i]) / ns);
    axpy(-coef, row, &mut out);
    Ok(out)
}

/// One averaged step over `batch` with the weights of `scheme`.
pub fn avg_step(
    a: &DenseMatrix,
    b: &[f64],
    x: &[f64],
    batch: &SampleBatch,
    scheme: &SamplingScheme,
) -> Result<Vec<f64>> {
    check_len("right-hand side", a.rows(), b.len())?;
    check_len("iterate", a.cols(), x.len())?;
    check_len("scheme rows", a.rows(), scheme.rows())?;
    if let Some(&i) = batch.indices().iter().find(|&&i| i >= a.rows()) {
        return Err(Error::InvalidParameter(format!(
            "row index {i} out of range"
        )));
    }
    let mut out = x.to_vec();
    let mut work = StepBuffers::new(a.cols(), batch.len());
    averaged_update(a, b, scheme, batch.indices(), &mut out, &mut work, false);
    Ok(out)
}

/// The weighted sampling matrix `M_k = (1/q) Σ_{i∈τ_k} w_i E_ii / ‖A_i‖²`.
pub fn sampling_matrix(batch: &SampleBatch, scheme: &SamplingScheme) -> Result<DenseMatrix> {
    let m = scheme.rows();
    if let Some(&i) = batch.indices().iter().find(|&&i| i >= m) {
        return Err(Error::InvalidParameter(format!(
            "row index {i} out of range"
        )));
    }
    let q = batch.len() as f64;
    let mut diag = vec![0.0; m];
    for &i in batch.indices() {
        diag[i] += scheme.weights()[i] / scheme.row_norms_sq()[i];
    }
    for d in &mut diag {
        *d /= q;
    }
    Ok(DenseMatrix::diagonal(&diag))
}

struct StepBuffers {
    delta: Vec<f64>,
    coefs: Vec<f64>,
}

impl StepBuffers {
    fn new(n: usize, q: usize) -> Self {
        Self {
            delta: vec![0.0; n],
            coefs: Vec::with_capacity(q),
        }
    }
}

#[inline]
fn row_coefficient(
    a: &DenseMatrix,
    b: &[f64],
    scheme: &SamplingScheme,
    x: &[f64],
    i: usize,
) -> f64 {
    scheme.weights()[i] * ((dot(a.row(i), x) - b[i]) / scheme.row_norms_sq()[i])
}

/// Shapes and indices are checked by the callers.
fn averaged_update(
    a: &DenseMatrix,
    b: &[f64],
    scheme: &SamplingScheme,
    indices: &[usize],
    x: &mut [f64],
    work: &mut StepBuffers,
    parallel: bool,
) {
    work.coefs.clear();
    compute_coefficients(a, b, scheme, indices, x, &mut work.coefs, parallel);

    let delta = &mut work.delta;
    let (&first, rest) = indices.split_first().expect("non-empty batch");
    let c0 = work.coefs[0];
    for (d, aij) in delta.iter_mut().zip(a.row(first)) {
        *d = c0 * aij;
    }
    for (&i, &c) in rest.iter().zip(&work.coefs[1..]) {
        axpy(c, a.row(i), delta);
    }
    let q = indices.len() as f64;
    for (xj, dj) in x.iter_mut().zip(delta.iter()) {
        *xj -= dj / q;
    }
}

#[cfg(feature = "parallel")]
fn compute_coefficients(
    a: &DenseMatrix,
    b: &[f64],
    scheme: &SamplingScheme,
    indices: &[usize],
    x: &[f64],
    out: &mut Vec<f64>,
    parallel: bool,
) {
    use rayon::prelude::*;
    if parallel {
        indices
            .par_iter()
            .map(|&i| row_coefficient(a, b, scheme, x, i))
            .collect_into_vec(out);
    } else {
        out.extend(indices.iter().map(|&i| row_coefficient(a, b, scheme, x, i)));
    }
}

#[cfg(not(feature = "parallel"))]
fn compute_coefficients(
    a: &DenseMatrix,
    b: &[f64],
    scheme: &SamplingScheme,
    indices: &[usize],
    x: &[f64],
    out: &mut Vec<f64>,
    _parallel: bool,
) {
    out.extend(indices.iter().map(|&i| row_coefficient(a, b, scheme, x, i)));
}

/// Step-by-step driver for the averaged method.
///
/// Owns the iterate, the generator and the scratch buffers; [`solve`]
/// is a loop over [`Stepper::step`].
pub struct Stepper<'a> {
    a: &'a DenseMatrix,
    b: &'a [f64],
    scheme: &'a SamplingScheme,
    threads: usize,
    parallel: bool,
    rng: SolverRng,
    x: Vec<f64>,
    indices: Vec<usize>,
    work: StepBuffers,
}

impl<'a> Stepper<'a> {
    pub fn new(
        system: &'a LinearSystem,
        scheme: &'a SamplingScheme,
        config: &SolverConfig,
        x0: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        check_len("scheme rows", system.rows(), scheme.rows())?;
        check_len("initial iterate", system.cols(), x0.len())?;
        Ok(Self {
            a: &system.a,
            b: &system.b,
            scheme,
            threads: config.threads,
            parallel: config.parallel,
            rng: rng_from_seed(config.seed),
            x: x0,
            indices: Vec::with_capacity(config.threads),
            work: StepBuffers::new(system.cols(), config.threads),
        })
    }

    /// Draws `τ_k`, applies the averaged update and returns `τ_k`.
    pub fn step(&mut self) -> &[usize] {
        self.scheme
            .draw_into(self.threads, &mut self.rng, &mut self.indices);
        averaged_update(
            self.a,
            self.b,
            self.scheme,
            &self.indices,
            &mut self.x,
            &mut self.work,
            self.parallel,
        );
        &self.indices
    }

    pub fn iterate(&self) -> &[f64] {
        &self.x
    }

    pub fn into_iterate(self) -> Vec<f64> {
        self.x
    }
}

/// Runs `K` averaged iterations from `x⁰ = 0`.
pub fn solve(
    system: &LinearSystem,
    scheme: &SamplingScheme,
    config: &SolverConfig,
) -> Result<SolveTrace> {
    solve_from(system, scheme, config, vec![0.0; system.cols()])
}

/// Runs `K` averaged iterations from the given starting point.
pub fn solve_from(
    system: &LinearSystem,
    scheme: &SamplingScheme,
    config: &SolverConfig,
    x0: Vec<f64>,
) -> Result<SolveTrace> {
    let mut stepper = Stepper::new(system, scheme, config, x0)?;
    let mut recorder = Recorder::new(system, config);
    recorder.record(stepper.iterate())?;
    let mut done = 0;
    let mut stopped_early = recorder.converged(stepper.iterate())?;
    while !stopped_early && done < config.iterations {
        stepper.step();
        done += 1;
        recorder.record(stepper.iterate())?;
        stopped_early = recorder.converged(stepper.iterate())? && done < config.iterations;
    }
    Ok(recorder.finish(stepper.into_iterate(), done, stopped_early))
}

/// Plain relaxed RK: one row per iteration drawn from the scheme's
/// probabilities, relaxation `config.lambda`, weights ignored. Requires
/// `config.threads == 1`.
pub fn solve_rk(
    system: &LinearSystem,
    scheme: &SamplingScheme,
    config: &SolverConfig,
) -> Result<SolveTrace> {
    config.validate()?;
    if config.threads != 1 {
        return Err(Error::InvalidParameter(
            "plain RK samples exactly one row per iteration".into(),
        ));
    }
    check_len("scheme rows", system.rows(), scheme.rows())?;
    let (a, b) = (&system.a, &system.b);
    let mut rng = rng_from_seed(config.seed);
    let mut x = vec![0.0; system.cols()];
    let mut recorder = Recorder::new(system, config);
    recorder.record(&x)?;
    let mut done = 0;
    let mut stopped_early = recorder.converged(&x)?;
    while !stopped_early && done < config.iterations {
        let i = scheme.draw_index(&mut rng);
        let row = a.row(i);
        let coef = config.lambda * ((dot(row, &x) - b[i]) / scheme.row_norms_sq()[i]);
        axpy(-coef, row, &mut x);
        done += 1;
        recorder.record(&x)?;
        stopped_early = recorder.converged(&x)? && done < config.iterations;
    }
    Ok(recorder.finish(x, done, stopped_early))
}

struct Recorder<'a> {
    system: &'a LinearSystem,
    track_error: bool,
    track_residual: bool,
    tolerance: Option<f64>,
    sq_errors: Vec<f64>,
    sq_residuals: Vec<f64>,
}

impl<'a> Recorder<'a> {
    fn new(system: &'a LinearSystem, config: &SolverConfig) -> Self {
        let track_error = config.record_trace && system.x_star.is_some();
        let cap = if track_error || config.record_residual {
            config.iterations + 1
        } else {
            0
        };
        Self {
            system,
            track_error,
            track_residual: config.record_residual,
            tolerance: config.tolerance,
            sq_errors: Vec::with_capacity(if track_error { cap } else { 0 }),
            sq_residuals: Vec::with_capacity(if config.record_residual { cap } else { 0 }),
        }
    }

    fn record(&mut self, x: &[f64]) -> Result<()> {
        if self.track_error {
            let x_star = self.system.x_star.as_ref().expect("checked in new");
            self.sq_errors.push(error_sq(x, x_star)?);
        }
        if self.track_residual {
            let r = residual(&self.system.a, x, &self.system.b)?;
            self.sq_residuals.push(norm_sq(&r));
        }
        Ok(())
    }

    fn converged(&self, x: &[f64]) -> Result<bool> {
        let Some(tol) = self.tolerance else {
            return Ok(false);
        };
        let r_sq = match self.sq_residuals.last() {
            Some(&r) if self.track_residual => r,
            _ => norm_sq(&residual(&self.system.a, x, &self.system.b)?),
        };
        Ok(libm::sqrt(r_sq) <= tol)
    }

    fn finish(self, final_iterate: Vec<f64>, iterations: usize, stopped_early: bool) -> SolveTrace {
        SolveTrace {
            sq_errors: self.sq_errors,
            sq_residuals: self.sq_residuals,
            final_iterate,
            iterations,
            stopped_early,
        }
    }
}
