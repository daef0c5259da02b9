//! Cyclic Jacobi eigenvalues for small dense symmetric matrices and the
//! normalized Gram spectrum built on top of them.

use alloc::vec::Vec;

use super::{row_norms_sq, DenseMatrix, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const OFF_DIAG_TOL: f64 = 1e-14;

/// Eigenvalues of a symmetric matrix, ascending.
///
/// Runs cyclic Jacobi sweeps until every off-diagonal magnitude is below
/// `1e-14 · ‖M‖_F` (for a PSD matrix this is at least as strict as the
/// same factor times the trace). Only the upper triangle is read.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch {
            context: "symmetric eigenvalues (square matrix)",
            expected: m.rows(),
            found: m.cols(),
        });
    }
    let n = m.rows();
    let mut a = m.clone();
    for i in 0..n {
        for j in 0..i {
            a.set(i, j, a.get(j, i));
        }
    }
    let tol = OFF_DIAG_TOL * libm::sqrt(a.frobenius_sq());

    for _ in 0..MAX_SWEEPS {
        let mut max_off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                max_off = max_off.max(a.get(p, q).abs());
            }
        }
        if max_off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol {
                    continue;
                }
                rotate(&mut a, p, q, apq);
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Annihilates `a[p][q]` with one Jacobi rotation applied on both sides.
fn rotate(a: &mut DenseMatrix, p: usize, q: usize, apq: f64) {
    let n = a.rows();
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + libm::sqrt(theta * theta + 1.0))
    };
    let c = 1.0 / libm::sqrt(t * t + 1.0);
    let s = t * c;

    a.set(p, p, app - t * apq);
    a.set(q, q, aqq + t * apq);
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a.get(r, p);
        let arq = a.get(r, q);
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        a.set(r, p, new_rp);
        a.set(p, r, new_rp);
        a.set(r, q, new_rq);
        a.set(q, r, new_rq);
    }
}

/// Full spectrum of `AᵀA` for a full-rank `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Eigenvalues of AᵀA (squared singular values of A), ascending.
    pub eigenvalues: Vec<f64>,
    /// `‖A‖_F²`
    pub frob_sq: f64,
}

impl Spectrum {
    /// Eigenvalues of `AᵀA / ‖A‖_F²`, ascending. They sum to one.
    pub fn normalized(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e / self.frob_sq).collect()
    }

    pub fn info(&self) -> SpectralInfo {
        let sigma_min_sq = self.eigenvalues[0];
        let sigma_max_sq = *self.eigenvalues.last().expect("non-empty spectrum");
        SpectralInfo {
            frob_sq: self.frob_sq,
            sigma_min_sq,
            sigma_max_sq,
            s_min: sigma_min_sq / self.frob_sq,
            s_max: sigma_max_sq / self.frob_sq,
        }
    }
}

/// Extreme squared singular values of `A`, raw and normalized by `‖A‖_F²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInfo {
    pub frob_sq: f64,
    pub sigma_min_sq: f64,
    pub sigma_max_sq: f64,
    pub s_min: f64,
    pub s_max: f64,
}

/// Computes the spectrum of `AᵀA` and rejects rank-deficient `A`.
///
/// An eigenvalue at or below `rank_tol · σ²_max` counts as zero.
pub fn spectrum(a: &DenseMatrix, rank_tol: f64) -> Result<Spectrum> {
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "rank tolerance must be positive, got {rank_tol}"
        )));
    }
    let eigenvalues = symmetric_eigenvalues(&a.gram())?;
    let frob_sq: f64 = row_norms_sq(a).iter().sum();
    let max = *eigenvalues.last().expect("n >= 1");
    let threshold = rank_tol * max;
    if max <= 0.0 || eigenvalues[0] <= threshold {
        return Err(Error::RankDeficient {
            eigenvalue: eigenvalues[0],
            threshold,
        });
    }
    Ok(Spectrum {
        eigenvalues,
        frob_sq,
    })
}

/// `spectrum(a, rank_tol).info()`
pub fn spectral_extremes(a: &DenseMatrix, rank_tol: f64) -> Result<SpectralInfo> {
    Ok(spectrum(a, rank_tol)?.info())
}

impl DenseMatrix {
    /// Spectral extremes with the default rank tolerance.
    pub fn spectral_info(&self) -> Result<SpectralInfo> {
        spectral_extremes(self, DEFAULT_RANK_TOL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_and_diagonal() {
        let info = spectral_extremes(&DenseMatrix::identity(2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(info.frob_sq, 2.0);
        assert_eq!((info.s_min, info.s_max), (0.5, 0.5));

        let info =
            spectral_extremes(&DenseMatrix::diagonal(&[1.0, 2.0]), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(info.frob_sq, 5.0);
        assert!(close(info.s_min, 0.2, 1e-15));
        assert!(close(info.s_max, 0.8, 1e-15));
    }

    #[test]
    fn two_by_two_matches_characteristic_polynomial() {
        // AᵀA = [[2,1],[1,1]]: λ² − 3λ + 1 = 0.
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        let info = spectral_extremes(&a, DEFAULT_RANK_TOL).unwrap();
        let root5 = 5f64.sqrt();
        let (lo, hi) = ((3.0 - root5) / 2.0, (3.0 + root5) / 2.0);
        assert!(close(info.sigma_min_sq, lo, 1e-14));
        assert!(close(info.sigma_max_sq, hi, 1e-14));
        assert!(close(info.s_min, lo / 3.0, 1e-15));
        assert!(close(info.s_max, hi / 3.0, 1e-15));
        assert!(close(info.s_min, 0.12732, 1e-5));
        assert!(close(info.s_max, 0.87268, 1e-5));
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(matches!(
            spectral_extremes(&a, DEFAULT_RANK_TOL),
            Err(Error::RankDeficient { .. })
        ));
        // more columns than rows
        let wide = DenseMatrix::from_rows(&[[1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(
            spectral_extremes(&wide, DEFAULT_RANK_TOL),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn jacobi_on_indefinite_matrix() {
        // eigenvalues 3 and −1
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        let eig = symmetric_eigenvalues(&m).unwrap();
        assert!(close(eig[0], -1.0, 1e-14) && close(eig[1], 3.0, 1e-14));
    }

    #[test]
    fn jacobi_preserves_trace_on_larger_matrix() {
        // tridiagonal Toeplitz: eigenvalues 2 − 2cos(kπ/(n+1))
        let n = 8;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 2.0);
            if i + 1 < n {
                m.set(i, i + 1, -1.0);
                m.set(i + 1, i, -1.0);
            }
        }
        let eig = symmetric_eigenvalues(&m).unwrap();
        for (k, e) in eig.iter().enumerate() {
            let expected =
                2.0 - 2.0 * (((k + 1) as f64) * core::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!(close(*e, expected, 1e-13), "{e} vs {expected}");
        }
    }
}
