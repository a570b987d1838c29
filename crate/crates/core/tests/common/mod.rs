#![allow(dead_code)]

use kaczmarz::{LinearSystem, Matrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Entries uniform in [-1, 1].
pub fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Matrix {
    let data = (0..m * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Matrix::from_row_major(m, n, data).unwrap()
}

/// A random consistent system with full row rank (by the library's own
/// rank test), resampled until one is found.
pub fn random_full_rank_system(rng: &mut ChaCha8Rng, m: usize, n: usize) -> LinearSystem {
    loop {
        let a = random_matrix(rng, m, n);
        let b = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let s = LinearSystem::new(a, b).unwrap();
        if s.has_full_row_rank() {
            return s;
        }
    }
}

pub fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows(), m.ncols(), m.as_row_major())
}

/// Minimal-norm solution through an SVD pseudoinverse, independent of the
/// Gram/Cholesky route used by the library.
pub fn pinv_solution(system: &LinearSystem) -> Vec<f64> {
    let a = to_nalgebra(system.matrix());
    let pinv = a.pseudo_inverse(1e-13).unwrap();
    let x = pinv * DVector::from_column_slice(system.rhs());
    x.iter().copied().collect()
}

/// Row-space projection `A⁺ A v` through the SVD pseudoinverse.
pub fn pinv_row_projection(system: &LinearSystem, v: &[f64]) -> Vec<f64> {
    let a = to_nalgebra(system.matrix());
    let pinv = a.clone().pseudo_inverse(1e-13).unwrap();
    let p = pinv * (a * DVector::from_column_slice(v));
    p.iter().copied().collect()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
}
