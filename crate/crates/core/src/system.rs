//! A linear system together with optional ground truth.

use crate::error::{Error, Result};
use crate::linalg::{check_len, norm_sq, DenseMatrix, RealVector};

/// `A x = b` with, optionally, the least-squares solution `x⋆` and the
/// least-squares residual `r⋆ = b − A x⋆`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DenseMatrix,
    pub b: RealVector,
    pub x_star: Option<RealVector>,
    pub r_star: Option<RealVector>,
}

impl LinearSystem {
    pub fn new(a: DenseMatrix, b: RealVector) -> Result<Self> {
        check_len("right-hand side", a.rows(), b.len())?;
        Ok(Self {
            a,
            b,
            x_star: None,
            r_star: None,
        })
    }

    /// Attaches ground truth. When both are given, checks
    /// `b = A x⋆ + r⋆` (relative 1e-12) and `‖Aᵀr⋆‖ ≤ 1e-10 ‖A‖_F ‖r⋆‖`.
    pub fn with_solution(mut self, x_star: RealVector, r_star: Option<RealVector>) -> Result<Self> {
        check_len("least-squares solution", self.a.cols(), x_star.len())?;
        if let Some(r) = &r_star {
            check_len("least-squares residual", self.a.rows(), r.len())?;
            let ax = self.a.matvec(&x_star)?;
            let scale = libm::sqrt(norm_sq(&ax)) + libm::sqrt(r.norm_sq()) + f64::MIN_POSITIVE;
            let mismatch = ax
                .iter()
                .zip(r.iter())
                .zip(self.b.iter())
                .map(|((axi, ri), bi)| (axi + ri - bi).abs())
                .fold(0.0, f64::max);
            if mismatch > 1e-12 * scale {
                return Err(Error::InvalidParameter(alloc::format!(
                    "b differs from A x⋆ + r⋆ by {mismatch:e}"
                )));
            }
            let atr = self.a.matvec_transpose(r)?;
            let bound = 1e-10 * libm::sqrt(self.a.frobenius_sq()) * libm::sqrt(r.norm_sq());
            if libm::sqrt(norm_sq(&atr)) > bound {
                return Err(Error::InvalidParameter(
                    "r⋆ is not orthogonal to the range of A".into(),
                ));
            }
        }
        self.x_star = Some(x_star);
        self.r_star = r_star;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    /// `‖r⋆‖²`, zero when no residual is attached.
    pub fn r_star_norm_sq(&self) -> f64 {
        self.r_star.as_ref().map_or(0.0, |r| r.norm_sq())
    }
}
