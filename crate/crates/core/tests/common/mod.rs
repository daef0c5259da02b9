#![allow(dead_code)]

use kaczmarz_core::{DenseMatrix, SolverRng};
use rand::Rng;

/// Entries uniform in [-1, 1).
pub fn random_matrix(rng: &mut SolverRng, m: usize, n: usize) -> DenseMatrix {
    let data = (0..m * n)
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    DenseMatrix::new(m, n, data).unwrap()
}

pub fn random_vector(rng: &mut SolverRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
