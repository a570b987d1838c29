//! Dense row-major matrices, the `A x = b` system type, and the Gram-matrix
//! machinery behind the minimal-norm solution and the row-space / null-space
//! projections.
//!
//! All row-space computations go through the Gram matrix `G = A Aᵀ`. Under
//! full row rank `G` is symmetric positive definite and is factored once with
//! Cholesky; a pivot at or below `rank_tol · max_i G_ii` is reported as
//! [`LinalgError::RankDeficient`].

use std::sync::OnceLock;

use thiserror::Error;

/// Relative pivot threshold used by the Gram Cholesky factorization.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {what} at position {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("row {row} is zero; eliminate it before building the system")]
    ZeroRow { row: usize },
    #[error("Gram matrix is numerically singular at pivot {pivot} (value {value:e}, threshold {threshold:e})")]
    RankDeficient {
        pivot: usize,
        value: f64,
        threshold: f64,
    },
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Dense `m x n` matrix stored row by row in one contiguous buffer.
///
/// Unlike [`LinearSystem`], a `Matrix` may contain zero rows; the assumption
/// checker needs to be able to look at such matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Empty { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                what: "row-major buffer length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                what: "matrix",
                index,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(m * n);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n {
                return Err(LinalgError::DimensionMismatch {
                    what: "row length",
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(m, n, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix {
            rows: n,
            cols: n,
            data,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// `‖A_i‖²` for every row, zero rows included.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        self.rows().map(|r| dot(r, r)).collect()
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec: length mismatch");
        self.rows().map(|r| dot(r, x)).collect()
    }

    /// `Aᵀ y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tr_mul_vec: length mismatch");
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.rows().zip(y) {
            if yi != 0.0 {
                axpy(yi, row, &mut out);
            }
        }
        out
    }

    /// `A Aᵀ` as a row-major `m x m` buffer.
    pub fn gram(&self) -> Vec<f64> {
        let m = self.rows;
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            let ri = self.row(i);
            for j in 0..=i {
                let v = dot(ri, self.row(j));
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
        }
        g
    }
}

/// Lower-triangular Cholesky factor of a Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramFactor {
    m: usize,
    lower: Vec<f64>,
}

impl GramFactor {
    /// Factors a symmetric `m x m` matrix. A pivot `d` with
    /// `d <= rank_tol * max_diag` (or NaN) signals rank deficiency.
    pub fn new(gram: &[f64], m: usize, rank_tol: f64) -> Result<Self, LinalgError> {
        assert_eq!(gram.len(), m * m);
        let max_diag = (0..m).fold(0.0_f64, |acc, i| acc.max(gram[i * m + i]));
        let threshold = rank_tol * max_diag;
        let mut lower = vec![0.0; m * m];
        for j in 0..m {
            let mut d = gram[j * m + j];
            for k in 0..j {
                d -= lower[j * m + k] * lower[j * m + k];
            }
            if !(d > threshold) {
                return Err(LinalgError::RankDeficient {
                    pivot: j,
                    value: d,
                    threshold,
                });
            }
            let ljj = d.sqrt();
            lower[j * m + j] = ljj;
            for i in j + 1..m {
                let mut s = gram[i * m + j];
                for k in 0..j {
                    s -= lower[i * m + k] * lower[j * m + k];
                }
                lower[i * m + j] = s / ljj;
            }
        }
        Ok(GramFactor { m, lower })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Solves `L Lᵀ y = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.m;
        assert_eq!(rhs.len(), m);
        let l = &self.lower;
        let mut y = rhs.to_vec();
        for i in 0..m {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * m + k] * y[k];
            }
            y[i] = s / l[i * m + i];
        }
        for i in (0..m).rev() {
            let mut s = y[i];
            for k in i + 1..m {
                s -= l[k * m + i] * y[k];
            }
            y[i] = s / l[i * m + i];
        }
        y
    }
}

/// Coefficients of a vector in the (generally non-orthogonal) row basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    /// `γ` with `Aᵀ γ = P_R(v)`.
    pub coefficients: Vec<f64>,
    /// `‖Aᵀ γ − v‖`; small iff `v` lies in the row space.
    pub reconstruction_residual: f64,
}

/// The system `A x = b` with cached row norms.
///
/// Immutable after construction. Zero rows are rejected: the caller is
/// expected to drop them explicitly, which leaves the solution set unchanged.
/// The Gram matrix and its Cholesky factor are built lazily on first use.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    matrix: Matrix,
    rhs: Vec<f64>,
    row_norms_sq: Vec<f64>,
    rank_tol: f64,
    gram: OnceLock<Vec<f64>>,
    factor: OnceLock<Result<GramFactor, LinalgError>>,
}

impl LinearSystem {
    pub fn new(matrix: Matrix, rhs: Vec<f64>) -> Result<Self, LinalgError> {
        if rhs.len() != matrix.nrows() {
            return Err(LinalgError::DimensionMismatch {
                what: "right-hand side length",
                expected: matrix.nrows(),
                got: rhs.len(),
            });
        }
        if let Some(index) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                what: "right-hand side",
                index,
            });
        }
        let row_norms_sq = matrix.row_norms_sq();
        if let Some(row) = row_norms_sq.iter().position(|&s| s <= 0.0) {
            return Err(LinalgError::ZeroRow { row });
        }
        Ok(LinearSystem {
            matrix,
            rhs,
            row_norms_sq,
            rank_tol: DEFAULT_RANK_TOL,
            gram: OnceLock::new(),
            factor: OnceLock::new(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], rhs: &[f64]) -> Result<Self, LinalgError> {
        Self::new(Matrix::from_rows(rows)?, rhs.to_vec())
    }

    /// Overrides the relative Cholesky pivot threshold.
    pub fn with_rank_tol(mut self, rank_tol: f64) -> Self {
        self.rank_tol = rank_tol;
        self.factor = OnceLock::new();
        self
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    #[inline]
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Cached `‖A_i‖²`.
    #[inline]
    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    /// `A x − b`
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.matrix.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(&self.rhs) {
            *ri -= bi;
        }
        r
    }

    /// Cached row-major `A Aᵀ`.
    pub fn gram(&self) -> &[f64] {
        self.gram.get_or_init(|| self.matrix.gram())
    }

    pub fn gram_factor(&self) -> Result<&GramFactor, LinalgError> {
        self.factor
            .get_or_init(|| GramFactor::new(self.gram(), self.nrows(), self.rank_tol))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// True if the Gram factorization succeeds.
    pub fn has_full_row_rank(&self) -> bool {
        self.gram_factor().is_ok()
    }

    /// `x_LS = Aᵀ y` with `(A Aᵀ) y = b`.
    pub fn min_norm_solution(&self) -> Result<Vec<f64>, LinalgError> {
        let y = self.gram_factor()?.solve(&self.rhs);
        Ok(self.matrix.tr_mul_vec(&y))
    }

    /// Solves `(A Aᵀ) γ = A v`; `Aᵀ γ` is then the row-space projection of `v`.
    pub fn decompose_in_row_space(&self, v: &[f64]) -> Result<DecompositionResult, LinalgError> {
        self.check_len(v)?;
        let coefficients = self.gram_factor()?.solve(&self.matrix.mul_vec(v));
        let recon = self.matrix.tr_mul_vec(&coefficients);
        let reconstruction_residual = distance(&recon, v);
        Ok(DecompositionResult {
            coefficients,
            reconstruction_residual,
        })
    }

    /// `P_R(v) = Aᵀ (A Aᵀ)⁻¹ A v`
    pub fn project_row_space(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.check_len(v)?;
        let gamma = self.gram_factor()?.solve(&self.matrix.mul_vec(v));
        Ok(self.matrix.tr_mul_vec(&gamma))
    }

    /// `P_N(v) = v − P_R(v)`
    pub fn project_null_space(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let pr = self.project_row_space(v)?;
        Ok(sub(v, &pr))
    }

    fn check_len(&self, v: &[f64]) -> Result<(), LinalgError> {
        if v.len() != self.ncols() {
            return Err(LinalgError::DimensionMismatch {
                what: "vector length",
                expected: self.ncols(),
                got: v.len(),
            });
        }
        Ok(())
    }
}

impl PartialEq for LinearSystem {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix && self.rhs == other.rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn row_norms() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(m.row_norms_sq(), vec![1.0, 1.0]);
        let m = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(m.row_norms_sq(), vec![2.0]);
        let m = Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap();
        assert_eq!(m.row_norms_sq(), vec![25.0, 0.0]);
    }

    #[test]
    fn zero_row_rejected_by_system() {
        let m = Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap();
        assert_eq!(
            LinearSystem::new(m, vec![1.0, 0.0]).unwrap_err(),
            LinalgError::ZeroRow { row: 1 }
        );
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Matrix::from_rows::<Vec<f64>>(&[]),
            Err(LinalgError::Empty { .. })
        ));
        assert!(matches!(
            Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            LinearSystem::from_rows(&[[1.0, 2.0]], &[1.0, 2.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            LinearSystem::from_rows(&[[1.0, f64::NAN]], &[1.0]),
            Err(LinalgError::NonFinite { .. })
        ));
    }

    #[test]
    fn min_norm_identity() {
        let s = LinearSystem::new(Matrix::identity(2), vec![1.0, 2.0]).unwrap();
        assert!(close(&s.min_norm_solution().unwrap(), &[1.0, 2.0], 1e-15));
    }

    #[test]
    fn min_norm_single_row() {
        let s = LinearSystem::from_rows(&[[1.0, 1.0]], &[2.0]).unwrap();
        assert!(close(&s.min_norm_solution().unwrap(), &[1.0, 1.0], 1e-15));
    }

    #[test]
    fn min_norm_square() {
        let s = LinearSystem::from_rows(&[[1.0, 0.0], [1.0, 1.0]], &[1.0, 3.0]).unwrap();
        assert!(close(&s.min_norm_solution().unwrap(), &[1.0, 2.0], 1e-14));
    }

    #[test]
    fn rank_deficient_gram() {
        let s = LinearSystem::from_rows(&[[1.0, 1.0], [2.0, 2.0]], &[1.0, 2.0]).unwrap();
        assert!(matches!(
            s.min_norm_solution(),
            Err(LinalgError::RankDeficient { pivot: 1, .. })
        ));
        assert!(!s.has_full_row_rank());
        assert!(s.project_row_space(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn decompose_examples() {
        let s = LinearSystem::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let d = s.decompose_in_row_space(&[3.0, 4.0]).unwrap();
        assert!(close(&d.coefficients, &[3.0, 4.0], 1e-15));
        assert!(d.reconstruction_residual <= 1e-15);

        let s = LinearSystem::from_rows(&[[1.0, 1.0]], &[0.0]).unwrap();
        let d = s.decompose_in_row_space(&[1.0, 1.0]).unwrap();
        assert!(close(&d.coefficients, &[1.0], 1e-15));

        let s = LinearSystem::from_rows(&[[1.0, 0.0], [1.0, 1.0]], &[0.0, 0.0]).unwrap();
        let d = s.decompose_in_row_space(&[2.0, 1.0]).unwrap();
        assert!(close(&d.coefficients, &[1.0, 1.0], 1e-14));
        assert!(d.reconstruction_residual <= 1e-14);
    }

    #[test]
    fn decompose_reports_out_of_space_component() {
        let s = LinearSystem::from_rows(&[[1.0, 1.0]], &[0.0]).unwrap();
        let d = s.decompose_in_row_space(&[1.0, -1.0]).unwrap();
        assert!(close(&d.coefficients, &[0.0], 1e-15));
        assert!((d.reconstruction_residual - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let s = LinearSystem::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        assert!(close(
            &s.project_row_space(&[5.0, 7.0]).unwrap(),
            &[5.0, 7.0],
            1e-15
        ));
        assert!(close(
            &s.project_null_space(&[5.0, 7.0]).unwrap(),
            &[0.0, 0.0],
            1e-15
        ));

        let s = LinearSystem::from_rows(&[[1.0, 1.0]], &[0.0]).unwrap();
        assert!(close(
            &s.project_row_space(&[1.0, 0.0]).unwrap(),
            &[0.5, 0.5],
            1e-15
        ));
        assert!(close(
            &s.project_row_space(&[1.0, -1.0]).unwrap(),
            &[0.0, 0.0],
            1e-15
        ));
        assert!(close(
            &s.project_null_space(&[1.0, 0.0]).unwrap(),
            &[0.5, -0.5],
            1e-15
        ));
        assert_eq!(s.project_null_space(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn wrong_vector_length() {
        let s = LinearSystem::from_rows(&[[1.0, 1.0]], &[0.0]).unwrap();
        assert!(matches!(
            s.project_row_space(&[1.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cholesky_solves_spd() {
        // [[4,2],[2,3]] y = [2,1] -> y = [0.5, 0]
        let f = GramFactor::new(&[4.0, 2.0, 2.0, 3.0], 2, DEFAULT_RANK_TOL).unwrap();
        assert!(close(&f.solve(&[2.0, 1.0]), &[0.5, 0.0], 1e-15));
    }
}
