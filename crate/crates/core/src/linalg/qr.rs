//! Householder QR least squares.

use alloc::vec::Vec;

use super::{check_len, DenseMatrix, RealVector, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};

/// Least-squares solution `argmin ‖b − A x‖` for a tall full-rank `A`.
///
/// Factorizes `A = QR` with Householder reflections applied in place to a
/// copy of `A` and to `b`, then back-substitutes `R x = Qᵀb`. Rank
/// deficiency is detected on the diagonal of `R`: `|R_kk|² ≤ 1e-10 ·
/// max_j |R_jj|²` is rejected, mirroring the relative test on AᵀA.
pub fn least_squares(a: &DenseMatrix, b: &[f64]) -> Result<RealVector> {
    let (m, n) = (a.rows(), a.cols());
    check_len("right-hand side", m, b.len())?;
    if m < n {
        return Err(Error::RankDeficient {
            eigenvalue: 0.0,
            threshold: 0.0,
        });
    }

    let mut qr = a.as_slice().to_vec();
    let mut rhs = b.to_vec();
    let mut r_diag = Vec::with_capacity(n);

    for k in 0..n {
        let mut norm_sq = 0.0;
        for i in k..m {
            norm_sq += qr[i * n + k] * qr[i * n + k];
        }
        let norm = libm::sqrt(norm_sq);
        if norm == 0.0 {
            r_diag.push(0.0);
            continue;
        }
        // reflect x onto −sign(x_k)‖x‖ e_1 to avoid cancellation
        let alpha = if qr[k * n + k] > 0.0 { -norm } else { norm };
        // v = x − alpha e_1, stored in column k on and below the diagonal;
        // ‖v‖² = 2‖x‖(‖x‖ + |x_k|)
        let v_norm_sq = 2.0 * norm * (norm + qr[k * n + k].abs());
        qr[k * n + k] -= alpha;
        let beta = 2.0 / v_norm_sq;
        for j in (k + 1)..n {
            let mut s = 0.0;
            for i in k..m {
                s += qr[i * n + k] * qr[i * n + j];
            }
            let s = s * beta;
            for i in k..m {
                qr[i * n + j] -= s * qr[i * n + k];
            }
        }
        let mut s = 0.0;
        for i in k..m {
            s += qr[i * n + k] * rhs[i];
        }
        let s = s * beta;
        for i in k..m {
            rhs[i] -= s * qr[i * n + k];
        }
        r_diag.push(alpha);
    }

    let max_diag = r_diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let threshold = DEFAULT_RANK_TOL * max_diag * max_diag;
    if let Some(d) = r_diag.iter().find(|d| d.abs() * d.abs() <= threshold) {
        return Err(Error::RankDeficient {
            eigenvalue: d * d,
            threshold,
        });
    }

    let mut x = alloc::vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..n {
            s -= qr[k * n + j] * x[j];
        }
        x[k] = s / r_diag[k];
    }
    RealVector::new(x)
}
