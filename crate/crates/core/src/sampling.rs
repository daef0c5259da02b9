//! Row distributions, averaging weights and their coupling.
//!
//! A [`SamplingScheme`] carries the diagonal of `P` (probabilities), `W`
//! (weights) and `D²` (squared row norms). The scheme is *coupled* with
//! constant `α` when
//!
//! ```text
//! p_i · w_i · ‖A‖_F² / ‖A_i‖² = α   for every row i,
//! ```
//!
//! i.e. `P W D⁻² = (α / ‖A‖_F²) I`. With this normalization `α = 1`,
//! `q = 1` and unit weights is exactly randomized Kaczmarz.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{row_norms_sq, DenseMatrix};

/// Relative tolerance of the coupling check.
pub const COUPLING_TOL: f64 = 1e-10;
const PROB_SUM_TOL: f64 = 1e-12;

/// The three weight/probability families used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// `w_i = α`, `p_i = ‖A_i‖² / ‖A‖_F²`. Coupled.
    UniformWeightsRowNormProbs,
    /// `w_i = α m ‖A_i‖² / ‖A‖_F²`, `p_i = 1/m`. Coupled.
    RowNormWeightsUniformProbs,
    /// `w_i = α`, `p_i = 1/m`. Coupled only when all row norms agree.
    UniformWeightsUniformProbs,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [
        SchemeKind::UniformWeightsRowNormProbs,
        SchemeKind::RowNormWeightsUniformProbs,
        SchemeKind::UniformWeightsUniformProbs,
    ];

    /// CLI-facing identifier.
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::UniformWeightsRowNormProbs => "uniform-w-rownorm-p",
            SchemeKind::RowNormWeightsUniformProbs => "rownorm-w-uniform-p",
            SchemeKind::UniformWeightsUniformProbs => "uniform-w-uniform-p",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme `{s}`")))
    }
}

/// Result of checking the probability/weight coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// Every row ratio agrees; carries the common constant `α`.
    Holds(f64),
    /// The row at `index` deviates most, by `deviation` relative to the
    /// mean ratio.
    Violated { index: usize, deviation: f64 },
}

impl Coupling {
    pub fn alpha(self) -> Option<f64> {
        match self {
            Coupling::Holds(alpha) => Some(alpha),
            Coupling::Violated { .. } => None,
        }
    }
}

/// Diagonals of `P`, `W` and `D²` for one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingScheme {
    probs: Vec<f64>,
    weights: Vec<f64>,
    row_norms_sq: Vec<f64>,
    frob_sq: f64,
    cumulative: Vec<f64>,
    alpha: Option<f64>,
}

impl SamplingScheme {
    /// Builds one of the named families for `a`.
    pub fn from_kind(kind: SchemeKind, alpha: f64, a: &DenseMatrix) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "relaxation parameter must be positive, got {alpha}"
            )));
        }
        let norms = row_norms_sq(a);
        check_rows(&norms)?;
        let frob_sq: f64 = norms.iter().sum();
        let m = norms.len() as f64;
        let (probs, weights): (Vec<f64>, Vec<f64>) = match kind {
            SchemeKind::UniformWeightsRowNormProbs => {
                norms.iter().map(|n| (n / frob_sq, alpha)).unzip()
            }
            SchemeKind::RowNormWeightsUniformProbs => norms
                .iter()
                .map(|n| (1.0 / m, alpha * m * n / frob_sq))
                .unzip(),
            SchemeKind::UniformWeightsUniformProbs => {
                norms.iter().map(|_| (1.0 / m, alpha)).unzip()
            }
        };
        Self::new(probs, weights, norms)
    }

    /// Builds a scheme from explicit diagonals and validates it.
    pub fn new(probs: Vec<f64>, weights: Vec<f64>, row_norms_sq: Vec<f64>) -> Result<Self> {
        let m = row_norms_sq.len();
        if m == 0 {
            return Err(Error::InvalidShape("scheme with no rows".into()));
        }
        for (context, v) in [("probabilities", &probs), ("weights", &weights)] {
            if v.len() != m {
                return Err(Error::ShapeMismatch {
                    context,
                    expected: m,
                    found: v.len(),
                });
            }
        }
        check_rows(&row_norms_sq)?;
        if let Some(i) = probs.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "probability {i} is {}",
                probs[i]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}"
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weight {i} is {}",
                weights[i]
            )));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let frob_sq = row_norms_sq.iter().sum();
        let mut scheme = Self {
            probs,
            weights,
            row_norms_sq,
            frob_sq,
            cumulative,
            alpha: None,
        };
        scheme.alpha = scheme.check_coupling().alpha();
        Ok(scheme)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    pub fn rows(&self) -> usize {
        self.row_norms_sq.len()
    }

    /// Coupling constant, present iff the coupling holds.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Checks `p_i w_i ‖A‖_F² / ‖A_i‖² = α` for all rows at relative
    /// tolerance [`COUPLING_TOL`]. The reference constant is the mean
    /// ratio.
    pub fn check_coupling(&self) -> Coupling {
        let ratios: Vec<f64> = self
            .probs
            .iter()
            .zip(&self.weights)
            .zip(&self.row_norms_sq)
            .map(|((p, w), n)| p * w * self.frob_sq / n)
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let (index, deviation) = ratios
            .iter()
            .map(|r| {
                if mean > 0.0 {
                    (r - mean).abs() / mean
                } else {
                    f64::INFINITY
                }
            })
            .enumerate()
            .fold(
                (0, 0.0f64),
                |best, (i, d)| if d > best.1 { (i, d) } else { best },
            );
        if mean > 0.0 && deviation <= COUPLING_TOL {
            Coupling::Holds(mean)
        } else {
            Coupling::Violated { index, deviation }
        }
    }

    /// Like [`check_coupling`](Self::check_coupling) but as a `Result`.
    pub fn require_coupling(&self) -> Result<f64> {
        match self.check_coupling() {
            Coupling::Holds(alpha) => Ok(alpha),
            Coupling::Violated { index, deviation } => {
                Err(Error::CouplingViolated { index, deviation })
            }
        }
    }

    /// One draw from the categorical distribution `probs`, by inverse CDF.
    #[inline]
    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }

    /// `q` independent draws with replacement, in draw order.
    pub fn draw_batch<R: Rng + ?Sized>(&self, q: usize, rng: &mut R) -> Result<SampleBatch> {
        if q == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be at least 1".into(),
            ));
        }
        let mut indices = Vec::with_capacity(q);
        self.draw_into(q, rng, &mut indices);
        Ok(SampleBatch { indices })
    }

    pub(crate) fn draw_into<R: Rng + ?Sized>(&self, q: usize, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        out.extend((0..q).map(|_| self.draw_index(rng)));
    }
}

fn check_rows(norms: &[f64]) -> Result<()> {
    match norms.iter().position(|n| !(*n > 0.0)) {
        Some(row) => Err(Error::ZeroRow { row }),
        None => Ok(()),
    }
}

/// Row indices sampled for one iteration (the set `τ_k`, duplicates kept).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    indices: Vec<usize>,
}

impl SampleBatch {
    /// Validates a hand-built batch against the number of rows.
    pub fn new(indices: Vec<usize>, rows: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::InvalidParameter(format!(
                "row index {i} out of range for {rows} rows"
            )));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl From<SampleBatch> for Vec<usize> {
    fn from(b: SampleBatch) -> Self {
        b.indices
    }
}
