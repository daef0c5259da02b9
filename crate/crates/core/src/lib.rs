//! Randomized Kaczmarz with averaging.
//!
//! This crate implements the randomized Kaczmarz (RK) family of row-action
//! solvers for overdetermined least-squares problems `min ½‖b − Ax‖²`:
//!
//! * relaxed RK, which projects onto one sampled equation per iteration,
//! * RK with averaging, which samples `q` rows (with replacement), computes
//!   the `q` weighted projections independently and averages them.
//!
//! Alongside the solvers it provides the closed-form convergence-rate
//! constants and horizons for the averaged method, the optimal relaxation
//! parameter for uniform weights, and the exact first/second moments of the
//! weighted sampling matrix.
//!
//! # Modules
//!
//! * [`linalg`]: dense matrices and vectors, Jacobi eigenvalues of the Gram
//!   matrix, Householder least squares.
//! * [`sampling`]: row distributions, weights and the probability/weight
//!   coupling, seeded sampling with replacement.
//! * [`solver`]: the update rules and the iteration driver.
//! * [`theory`]: rate constants, horizons, moments and relaxation formulas.
//!
//! # no_std
//!
//! The crate is `no_std` and only needs `alloc`. The default `parallel`
//! feature enables `std` and computes the per-row contributions of an
//! averaged step on the rayon thread pool; results are bitwise identical to
//! the sequential path because the reduction always runs in batch order.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod linalg;
pub mod sampling;
pub mod solver;
pub mod system;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, RealVector, SpectralInfo, Spectrum};
pub use sampling::{Coupling, SampleBatch, SamplingScheme, SchemeKind};
pub use solver::{SolveTrace, SolverConfig};
pub use system::LinearSystem;
pub use theory::BoundReport;

/// Random number generator used for every sampled quantity in the crate.
///
/// ChaCha with 8 rounds: counter based, seedable, portable across
/// platforms, and cheap enough for per-trial streams.
pub type SolverRng = rand_chacha::ChaCha8Rng;

/// Builds the generator for a given seed.
pub fn rng_from_seed(seed: u64) -> SolverRng {
    use rand::SeedableRng;
    SolverRng::seed_from_u64(seed)
}
