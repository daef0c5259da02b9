//! Dense real linear algebra: the matrix/vector carriers, row norms,
//! residuals, Gram spectra and a Householder least-squares oracle.
//!
//! Everything here is a pure function of its inputs.

mod eigen;
mod qr;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, Index};

use crate::error::{Error, Result};

pub use eigen::{spectral_extremes, spectrum, symmetric_eigenvalues, SpectralInfo, Spectrum};
pub use qr::least_squares;

/// Relative threshold below which an eigenvalue of AᵀA counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Dense real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries. Rejects empty shapes,
    /// length mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("{rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "matrix entries",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::ShapeMismatch {
                    context: "row length",
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Internal constructor for computed results; the caller guarantees the shape.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn transpose(&self) -> Self {
        let mut t = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self::from_parts(self.cols, self.rows, t)
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec operand", self.cols, x.len())?;
        Ok(self.row_iter().map(|row| dot(row, x)).collect())
    }

    /// `Aᵀ y`
    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("transposed matvec operand", self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.row_iter().zip(y) {
            axpy(yi, row, &mut out);
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("matmul inner dimension", self.cols, other.rows)?;
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * other.cols..(i + 1) * other.cols];
            for (k, &aik) in self.row(i).iter().enumerate() {
                axpy(aik, other.row(k), out_row);
            }
        }
        Ok(Self::from_parts(self.rows, other.cols, out))
    }

    /// `AᵀA` (n×n, symmetric by construction).
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = vec![0.0; n * n];
        for row in self.row_iter() {
            for j in 0..n {
                let rj = row[j];
                if rj == 0.0 {
                    continue;
                }
                for k in j..n {
                    g[j * n + k] += rj * row[k];
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                g[j * n + k] = g[k * n + j];
            }
        }
        Self::from_parts(n, n, g)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        Self::from_parts(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    /// `self + factor · other`
    pub fn add_scaled(&self, factor: f64, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("matrix rows", self.rows, other.rows)?;
        check_len("matrix cols", self.cols, other.cols)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + factor * b)
            .collect();
        Ok(Self::from_parts(self.rows, self.cols, data))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidShape("empty vector".into()));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(data))
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector length must be positive");
        Self(vec![0.0; len])
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RealVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for RealVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `y += alpha · x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            context,
            expected,
            found,
        })
    }
}

/// Squared Euclidean norm of every row, `‖A_i‖²`.
pub fn row_norms_sq(a: &DenseMatrix) -> Vec<f64> {
    a.row_iter().map(norm_sq).collect()
}

/// `r = b − A x`
pub fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_len("right-hand side", a.rows(), b.len())?;
    let ax = a.matvec(x)?;
    Ok(b.iter().zip(ax).map(|(bi, axi)| bi - axi).collect())
}

/// `‖x − x⋆‖²`
pub fn error_sq(x: &[f64], x_star: &[f64]) -> Result<f64> {
    check_len("reference solution", x.len(), x_star.len())?;
    Ok(x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum())
}
