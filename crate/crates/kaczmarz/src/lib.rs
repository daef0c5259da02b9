//! Experiment harness and command-line front end for `kaczmarz-core`.
//!
//! * [`io`]: the matrix/vector CSV format and the experiment output tables.
//! * [`experiments`]: Gaussian test systems, multi-trial runs with
//!   percentile aggregation, relaxation sweeps and bound comparisons.
//! * [`figures`]: the experiment subcommands, each writing its CSV files
//!   and a manifest into an output directory.
//! * [`cli`]: argument parsing and dispatch.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod figures;
pub mod io;

pub use error::{Error, Result};
pub use kaczmarz_core as core;
