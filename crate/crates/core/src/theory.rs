//! Convergence-rate constants, horizons, sampling-matrix moments and the
//! relaxation-parameter formulas.
//!
//! Notation: `G = AᵀA / ‖A‖_F²` with eigenvalues `s_i` (they sum to one),
//! `s_min`/`s_max` its extreme eigenvalues, `q` the number of rows averaged
//! per iteration and `α` the coupling constant of the scheme.
//!
//! Every constant `ρ` here bounds one step in expectation,
//! `E‖e^{k+1}‖² ≤ ρ ‖e^k‖² + h`, so `E‖e^k‖² ≤ ρ^k ‖e⁰‖² + h (1 − ρ^k)/(1 − ρ)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    spectrum, symmetric_eigenvalues, DenseMatrix, SpectralInfo, Spectrum, DEFAULT_RANK_TOL,
};
use crate::sampling::SamplingScheme;

/// A contraction constant together with its additive horizon term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub rate: f64,
    pub horizon_step: f64,
    /// `horizon_step / (1 − rate)`, present iff `rate < 1`.
    pub horizon_limit: Option<f64>,
}

impl BoundReport {
    pub fn new(rate: f64, horizon_step: f64) -> Self {
        let horizon_limit = (rate < 1.0).then(|| horizon_step / (1.0 - rate));
        Self {
            rate,
            horizon_step,
            horizon_limit,
        }
    }

    /// Iterated bound `ρ^k ‖e⁰‖² + h Σ_{j<k} ρ^j` for `k = 0..=iterations`.
    pub fn trajectory(&self, initial_sq_err: f64, iterations: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(iterations + 1);
        let mut value = initial_sq_err;
        out.push(value);
        for _ in 0..iterations {
            value = self.rate * value + self.horizon_step;
            out.push(value);
        }
        out
    }
}

fn check_q(q: usize) -> Result<f64> {
    if q == 0 {
        Err(Error::DomainError("thread count must be at least 1".into()))
    } else {
        Ok(q as f64)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!("relaxation parameter {alpha}")))
    }
}

fn check_extremes(s_min: f64, s_max: f64) -> Result<()> {
    if 0.0 < s_min && s_min <= s_max && s_max <= 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!(
            "spectral extremes must satisfy 0 < s_min ≤ s_max ≤ 1, got ({s_min}, {s_max})"
        )))
    }
}

/// Largest singular value of a symmetric matrix: `max |λ_i|`.
pub fn symmetric_sigma_max(m: &DenseMatrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?
        .into_iter()
        .fold(0.0f64, |acc, e| acc.max(e.abs())))
}

/// `G = AᵀA / ‖A‖_F²`. Fails for rank-deficient `A`.
pub fn gram_normalized(a: &DenseMatrix) -> Result<DenseMatrix> {
    let spec = spectrum(a, DEFAULT_RANK_TOL)?;
    Ok(a.gram().scaled(1.0 / spec.frob_sq))
}

/// General (any coupled weights) rate constant
/// `σ_max((I − αG)² − (α²/q) G²) = max_i |(1 − α s_i)² − (α²/q) s_i²|`.
///
/// The scalar polynomial here is not convex-positive in general, so every
/// eigenvalue is visited instead of just the extremes.
pub fn rate_general(spec: &Spectrum, alpha: f64, q: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let qf = check_q(q)?;
    Ok(spec
        .normalized()
        .into_iter()
        .map(|s| {
            let lin = 1.0 - alpha * s;
            (lin * lin - alpha * alpha / qf * s * s).abs()
        })
        .fold(0.0, f64::max))
}

/// [`rate_general`] evaluated on the explicit n×n matrix polynomial.
pub fn rate_general_matrix(a: &DenseMatrix, alpha: f64, q: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let qf = check_q(q)?;
    let g = gram_normalized(a)?;
    let n = g.rows();
    let i_minus = DenseMatrix::identity(n).add_scaled(-alpha, &g)?;
    let sq = i_minus.matmul(&i_minus)?;
    let g2 = g.matmul(&g)?;
    symmetric_sigma_max(&sq.add_scaled(-alpha * alpha / qf, &g2)?)
}

/// Rate polynomial of the uniform-weight bound,
/// `p(σ) = 1 − 2ασ + α²(σ/q + (1 − 1/q)σ²)`, for `σ ∈ (0, 1]`.
pub fn p_poly(sigma: f64, alpha: f64, q: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let qf = check_q(q)?;
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::DomainError(format!("σ = {sigma} outside (0, 1]")));
    }
    // Factored so that α = q = 1 yields exactly 1 − σ.
    let inner = 2.0 - alpha / qf - alpha * (1.0 - 1.0 / qf) * sigma;
    Ok(1.0 - alpha * sigma * inner)
}

/// Uniform-weight rate constant `max(p(s_min), p(s_max))`.
///
/// `p` is convex and positive on `[0, 1]`, so its maximum over the
/// spectrum sits at one of the two extremes.
pub fn rate_uniform(s_min: f64, s_max: f64, alpha: f64, q: usize) -> Result<f64> {
    check_extremes(s_min, s_max)?;
    Ok(p_poly(s_min, alpha, q)?.max(p_poly(s_max, alpha, q)?))
}

/// Uniform-weight rate from the explicit matrix
/// `σ_max((I − αG)² + (α²/q)(I − G)G)`.
pub fn rate_uniform_matrix(a: &DenseMatrix, alpha: f64, q: usize) -> Result<f64> {
    check_alpha(alpha)?;
    let qf = check_q(q)?;
    let g = gram_normalized(a)?;
    let n = g.rows();
    let eye = DenseMatrix::identity(n);
    let i_minus = eye.add_scaled(-alpha, &g)?;
    let first = i_minus.matmul(&i_minus)?;
    let second = eye.add_scaled(-1.0, &g)?.matmul(&g)?;
    symmetric_sigma_max(&first.add_scaled(alpha * alpha / qf, &second)?)
}

/// Uniform-weight rate and horizon. The additive term is
/// `α² ‖r⋆‖² / (q ‖A‖_F²)`.
pub fn horizon_uniform(
    info: &SpectralInfo,
    alpha: f64,
    q: usize,
    r_star_norm_sq: f64,
) -> Result<BoundReport> {
    let rate = rate_uniform(info.s_min, info.s_max, alpha, q)?;
    if !(r_star_norm_sq >= 0.0) {
        return Err(Error::DomainError(format!("‖r⋆‖² = {r_star_norm_sq}")));
    }
    let step = alpha * alpha * r_star_norm_sq / (q as f64 * info.frob_sq);
    Ok(BoundReport::new(rate, step))
}

/// Per-iterate horizon term of the general bound,
/// `(α/q) ‖r^k‖²_W / ‖A‖_F²`, for a coupled scheme and a realized residual.
pub fn realized_horizon_step(scheme: &SamplingScheme, residual: &[f64], q: usize) -> Result<f64> {
    let alpha = scheme.require_coupling()?;
    let qf = check_q(q)?;
    if residual.len() != scheme.rows() {
        return Err(Error::ShapeMismatch {
            context: "residual",
            expected: scheme.rows(),
            found: residual.len(),
        });
    }
    let weighted: f64 = residual
        .iter()
        .zip(scheme.weights())
        .map(|(r, w)| w * r * r)
        .sum();
    Ok(alpha / qf * weighted / scheme.frob_sq())
}

/// Consistent-system rate for any coupled scheme,
/// `σ_max((I − αG)² + (α/q) AᵀWA/‖A‖_F² − (α²/q) G²)`, with `α` taken
/// from the scheme's coupling.
pub fn rate_consistent_general(a: &DenseMatrix, scheme: &SamplingScheme, q: usize) -> Result<f64> {
    let alpha = scheme.require_coupling()?;
    let qf = check_q(q)?;
    if scheme.rows() != a.rows() {
        return Err(Error::ShapeMismatch {
            context: "scheme rows",
            expected: a.rows(),
            found: scheme.rows(),
        });
    }
    let g = gram_normalized(a)?;
    let frob_sq = scheme.frob_sq();
    let n = a.cols();

    let mut atwa = DenseMatrix::zeros(n, n);
    for (row, &w) in a.row_iter().zip(scheme.weights()) {
        for (j, &rj) in row.iter().enumerate() {
            for (k, &rk) in row.iter().enumerate() {
                atwa.set(j, k, atwa.get(j, k) + w * rj * rk);
            }
        }
    }

    let i_minus = DenseMatrix::identity(n).add_scaled(-alpha, &g)?;
    let total = i_minus
        .matmul(&i_minus)?
        .add_scaled(alpha / qf / frob_sq, &atwa)?
        .add_scaled(-alpha * alpha / qf, &g.matmul(&g)?)?;
    symmetric_sigma_max(&total)
}

/// Closed-form moments of the weighted sampling matrix:
/// `E[M] = P W D⁻²` and
/// `E[Mᵀ A Aᵀ M] = (1/q) P W² D⁻² + (1 − 1/q) P W D⁻² A Aᵀ P W D⁻²`.
pub fn moments_mk(
    a: &DenseMatrix,
    scheme: &SamplingScheme,
    q: usize,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let qf = check_q(q)?;
    let m = a.rows();
    if scheme.rows() != m {
        return Err(Error::ShapeMismatch {
            context: "scheme rows",
            expected: m,
            found: scheme.rows(),
        });
    }
    let (p, w, d2) = (scheme.probs(), scheme.weights(), scheme.row_norms_sq());
    let first: Vec<f64> = (0..m).map(|i| p[i] * w[i] / d2[i]).collect();

    let mut second = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let aat = crate::linalg::dot(a.row(i), a.row(j));
            let mut v = (1.0 - 1.0 / qf) * first[i] * aat * first[j];
            if i == j {
                v += p[i] * w[i] * w[i] / d2[i] / qf;
            }
            second.set(i, j, v);
        }
    }
    Ok((DenseMatrix::diagonal(&first), second))
}

/// Relaxation parameter minimizing the uniform-weight rate constant:
///
/// ```text
/// α⋆ = q / (1 + (q−1) s_min)                 if 1 − (q−1)(s_max − s_min) ≥ 0
///      2q / (1 + (q−1)(s_min + s_max))       otherwise
/// ```
pub fn optimal_alpha(s_min: f64, s_max: f64, q: usize) -> Result<f64> {
    check_extremes(s_min, s_max)?;
    let qf = check_q(q)?;
    let q1 = qf - 1.0;
    if 1.0 - q1 * (s_max - s_min) >= 0.0 {
        Ok(qf / (1.0 + q1 * s_min))
    } else {
        Ok(2.0 * qf / (1.0 + q1 * (s_min + s_max)))
    }
}

/// The sketch-and-project relaxation `q / (1 + (q−1) s_max)`.
pub fn rt_alpha(s_max: f64, q: usize) -> Result<f64> {
    if !(s_max > 0.0 && s_max <= 1.0) {
        return Err(Error::DomainError(format!(
            "s_max = {s_max} outside (0, 1]"
        )));
    }
    let qf = check_q(q)?;
    Ok(qf / (1.0 + (qf - 1.0) * s_max))
}

/// Upper end of the α range on which [`optimal_alpha`] is the minimizer,
/// `2q / (1 + (q−1)(s_min + s_max))`.
pub fn alpha_upper(s_min: f64, s_max: f64, q: usize) -> Result<f64> {
    check_extremes(s_min, s_max)?;
    let qf = check_q(q)?;
    Ok(2.0 * qf / (1.0 + (qf - 1.0) * (s_min + s_max)))
}

/// Diagonal matrix realizing given normalized spectral extremes: an
/// `m×n` (`m ≥ n ≥ 2`) matrix whose Gram eigenvalues after normalization
/// are `s_min`, `s_max` and equal fill values in between. Useful for
/// exercising the bounds on prescribed spectra.
pub fn matrix_with_extremes(s_min: f64, s_max: f64, n: usize) -> Result<DenseMatrix> {
    check_extremes(s_min, s_max)?;
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two columns".into()));
    }
    let fill = if n > 2 {
        (1.0 - s_min - s_max) / (n - 2) as f64
    } else {
        0.0
    };
    let total = s_min + s_max + fill * (n - 2) as f64;
    if (n == 2 && (total - 1.0).abs() > 1e-12) || !(fill >= s_min && fill <= s_max) {
        return Err(Error::DomainError(format!(
            "({s_min}, {s_max}) not realizable with {n} columns"
        )));
    }
    let mut diag = vec![fill; n];
    diag[0] = s_min;
    diag[n - 1] = s_max;
    let sqrt: Vec<f64> = diag.into_iter().map(libm::sqrt).collect();
    Ok(DenseMatrix::diagonal(&sqrt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SchemeKind;

    fn diag12() -> DenseMatrix {
        DenseMatrix::diagonal(&[1.0, 2.0])
    }

    #[test]
    fn gram_normalized_examples() {
        let g = gram_normalized(&DenseMatrix::identity(2)).unwrap();
        assert_eq!(g, DenseMatrix::diagonal(&[0.5, 0.5]));
        let g = gram_normalized(&diag12()).unwrap();
        assert!(g.max_abs_diff(&DenseMatrix::diagonal(&[0.2, 0.8])) < 1e-15);
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(
            gram_normalized(&a),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn rate_general_examples() {
        let spec = spectrum(&diag12(), DEFAULT_RANK_TOL).unwrap();
        assert!((rate_general(&spec, 1.0, 1).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(rate_general(&spec, 0.0, 4).unwrap(), 1.0);
        assert!((rate_general_matrix(&diag12(), 1.0, 1).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn p_poly_examples() {
        for s in [0.01, 0.3, 1.0] {
            assert_eq!(p_poly(s, 0.0, 7).unwrap(), 1.0);
            assert!((p_poly(s, 1.0, 1).unwrap() - (1.0 - s)).abs() < 1e-15);
        }
        assert!(p_poly(0.0, 1.0, 1).is_err());
        assert!(p_poly(1.5, 1.0, 1).is_err());
        assert!(p_poly(0.5, 1.0, 0).is_err());
    }

    #[test]
    fn rk_rate_is_one_minus_s_min() {
        let info = diag12().spectral_info().unwrap();
        let rate = rate_uniform(info.s_min, info.s_max, 1.0, 1).unwrap();
        assert_eq!(rate, 1.0 - info.s_min);
        assert!((rate - 0.8).abs() < 1e-15);
    }

    #[test]
    fn horizon_examples() {
        let info = diag12().spectral_info().unwrap();
        let zero = horizon_uniform(&info, 1.3, 4, 0.0).unwrap();
        assert_eq!(zero.horizon_step, 0.0);
        assert_eq!(zero.horizon_limit, Some(0.0));

        let h1 = horizon_uniform(&info, 1.3, 4, 2.0).unwrap();
        let h2 = horizon_uniform(&info, 1.3, 8, 2.0).unwrap();
        assert_eq!(h2.horizon_step * 2.0, h1.horizon_step);

        let rk = horizon_uniform(&info, 1.0, 1, 2.0).unwrap();
        assert_eq!(rk.horizon_step, 2.0 / 5.0);
        assert!((rk.horizon_limit.unwrap() - 0.4 / 0.2).abs() < 1e-12);

        let diverging = BoundReport::new(1.2, 0.1);
        assert_eq!(diverging.horizon_limit, None);
    }

    #[test]
    fn trajectory_iterates_the_bound() {
        let b = BoundReport::new(0.5, 0.25);
        assert_eq!(b.trajectory(1.0, 3), vec![1.0, 0.75, 0.625, 0.5625]);
    }

    #[test]
    fn consistent_general_reduces_to_uniform() {
        let a = DenseMatrix::from_rows(&[
            [1.0, 0.2, -0.3],
            [0.5, 2.0, 0.1],
            [-1.0, 0.4, 1.5],
            [0.3, -0.7, 0.9],
            [2.0, 1.0, 0.0],
        ])
        .unwrap();
        let info = a.spectral_info().unwrap();
        for (alpha, q) in [(1.0, 1), (1.7, 3), (4.0, 10)] {
            let scheme =
                SamplingScheme::from_kind(SchemeKind::UniformWeightsRowNormProbs, alpha, &a)
                    .unwrap();
            let general = rate_consistent_general(&a, &scheme, q).unwrap();
            let uniform = rate_uniform(info.s_min, info.s_max, alpha, q).unwrap();
            assert!((general - uniform).abs() < 1e-10, "{general} vs {uniform}");
        }
        let bad =
            SamplingScheme::from_kind(SchemeKind::UniformWeightsUniformProbs, 1.0, &a).unwrap();
        assert!(matches!(
            rate_consistent_general(&a, &bad, 2),
            Err(Error::CouplingViolated { .. })
        ));
    }

    #[test]
    fn consistent_general_large_q_limit() {
        let a =
            DenseMatrix::from_rows(&[[1.0, 0.2], [0.5, 2.0], [-1.0, 0.4], [0.3, -0.7]]).unwrap();
        let alpha = 1.5;
        let scheme =
            SamplingScheme::from_kind(SchemeKind::RowNormWeightsUniformProbs, alpha, &a).unwrap();
        let g = gram_normalized(&a).unwrap();
        let i_minus = DenseMatrix::identity(2).add_scaled(-alpha, &g).unwrap();
        let limit = symmetric_sigma_max(&i_minus.matmul(&i_minus).unwrap()).unwrap();
        let rate = rate_consistent_general(&a, &scheme, 1_000_000).unwrap();
        assert!((rate - limit).abs() < 1e-5);
    }

    #[test]
    fn moments_q1_has_no_cross_term() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]]).unwrap();
        let scheme =
            SamplingScheme::from_kind(SchemeKind::RowNormWeightsUniformProbs, 1.3, &a).unwrap();
        let (_, second) = moments_mk(&a, &scheme, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j {
                    scheme.probs()[i] * scheme.weights()[i].powi(2) / scheme.row_norms_sq()[i]
                } else {
                    0.0
                };
                assert!((second.get(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn moments_first_is_scaled_identity_for_rk() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]]).unwrap();
        let scheme =
            SamplingScheme::from_kind(SchemeKind::UniformWeightsRowNormProbs, 1.0, &a).unwrap();
        let (first, _) = moments_mk(&a, &scheme, 3).unwrap();
        let expected = DenseMatrix::identity(3).scaled(1.0 / a.frobenius_sq());
        assert!(first.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn alpha_formulas_small_cases() {
        for s in [0.05, 0.5, 1.0] {
            assert_eq!(optimal_alpha(s, s, 1).unwrap(), 1.0);
            assert_eq!(rt_alpha(s, 1).unwrap(), 1.0);
        }
        for q in [1, 2, 50, 1000] {
            assert_eq!(rt_alpha(1.0, q).unwrap(), 1.0);
        }
        let a = optimal_alpha(0.1, 0.2, 11).unwrap();
        assert!((a - 5.5).abs() < 1e-12);
        assert!((alpha_upper(0.1, 0.2, 11).unwrap() - 5.5).abs() < 1e-12);
        assert!(optimal_alpha(0.0, 0.2, 3).is_err());
        assert!(optimal_alpha(0.3, 0.2, 3).is_err());
        assert!(optimal_alpha(0.1, 1.2, 3).is_err());
        assert!(rt_alpha(0.0, 3).is_err());
        assert!(rt_alpha(0.5, 0).is_err());
    }

    #[test]
    fn matrix_with_extremes_realizes_them() {
        let a = matrix_with_extremes(0.0579, 0.1667, 10).unwrap();
        let info = a.spectral_info().unwrap();
        assert!((info.s_min - 0.0579).abs() < 1e-14);
        assert!((info.s_max - 0.1667).abs() < 1e-14);
        assert!(matrix_with_extremes(0.4, 0.5, 10).is_err());
    }
}
