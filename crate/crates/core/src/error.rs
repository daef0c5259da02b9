//! Error type shared by every module of the crate.

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error(
        "matrix is rank deficient: eigenvalue {eigenvalue:e} of AᵀA is at or below {threshold:e}"
    )]
    RankDeficient { eigenvalue: f64, threshold: f64 },
    #[error("row {row} has zero norm")]
    ZeroRow { row: usize },
    #[error("coupling violated: row {index} deviates by {deviation:e} (relative)")]
    CouplingViolated { index: usize, deviation: f64 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Short machine-friendly name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::InvalidShape(_) => "InvalidShape",
            Error::NonFinite { .. } => "NonFinite",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::ZeroRow { .. } => "ZeroRow",
            Error::CouplingViolated { .. } => "CouplingViolated",
            Error::DomainError(_) => "DomainError",
            Error::InvalidParameter(_) => "InvalidParameter",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
