#![allow(dead_code)]

use bmc_core::models::FiniteRegion;
use nalgebra::DMatrix;

/// Largest eigenvalue modulus of a dense matrix, via nalgebra's Schur form.
pub fn dense_spectral_radius(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn region_radius(region: &FiniteRegion) -> f64 {
    dense_spectral_radius(&region.dense())
}

/// Eigenvalue of a walk on a path of `n` sites with constant up/down
/// probabilities: `2 sqrt(pq) cos(π/(n+1))`.
pub fn path_eigenvalue(n: usize, p: f64) -> f64 {
    2.0 * (p * (1.0 - p)).sqrt() * (std::f64::consts::PI / (n as f64 + 1.0)).cos()
}
