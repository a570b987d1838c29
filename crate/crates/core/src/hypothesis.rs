//! Positive row-space coefficients for the maximal-residual control.
//!
//! For a full-row-rank system with `m <= n`, write
//! `P_R(x⁰) − x_LS = Σ γ_i A_i`. If every `γ_i > 0`, the maximal-residual
//! control projects onto every row at least once. [`check_hypothesis`]
//! computes the `γ_i` for any starting point.
//!
//! For nonnegative matrices without zero rows and a bound `M >= ‖x_LS‖`,
//! [`construct_x0`] builds `x⁰ = Σ β_i A_i` with
//! `β_i = (1 + δ) · M / max_j A_ij`. Then `γ = β − α` where
//! `x_LS = Σ α_i A_i`. Every `γ_i` is positive when all `α_i >= 0`, since
//! then `α_i <= M / max_j A_ij`. When the `α_i` have mixed signs a positive
//! `α_i` can exceed that cap, so the result should still be confirmed with
//! [`check_hypothesis`].

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, GramFactor, LinalgError, LinearSystem, Matrix, DEFAULT_RANK_TOL};

/// Default relative margin `δ` in `β_i = (1 + δ) M / M_i`.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Relative positivity threshold: `γ_i` counts as positive only above
/// `POS_TOL_REL · ‖γ‖_∞`.
pub const POS_TOL_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypothesisError {
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("bound M = {bound} is smaller than the minimal-norm solution norm {norm}")]
    BoundTooSmall { bound: f64, norm: f64 },
    #[error("margin delta must be positive and finite (got {0})")]
    InvalidMargin(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub m: usize,
    pub n: usize,
    pub m_le_n: bool,
    pub full_row_rank: bool,
    /// Cholesky pivot at which the Gram factorization broke down.
    pub rank_failure_row: Option<usize>,
    /// `(row, column)` of every negative entry.
    pub negative_entries: Vec<(usize, usize)>,
    pub zero_rows: Vec<usize>,
}

impl AssumptionReport {
    pub fn nonnegative(&self) -> bool {
        self.negative_entries.is_empty()
    }

    pub fn passes(&self) -> bool {
        self.m_le_n && self.full_row_rank && self.nonnegative() && self.zero_rows.is_empty()
    }

    /// First failing assumption, phrased for an error message.
    pub fn first_failure(&self) -> Option<String> {
        if !self.m_le_n {
            return Some(format!("need m <= n, got m = {} > n = {}", self.m, self.n));
        }
        if let Some(&row) = self.zero_rows.first() {
            return Some(format!("row {row} is zero"));
        }
        if let Some(&(i, j)) = self.negative_entries.first() {
            return Some(format!("negative entry at ({i}, {j})"));
        }
        if !self.full_row_rank {
            return Some(format!(
                "matrix is not of full row rank (Gram pivot {} failed)",
                self.rank_failure_row.unwrap_or(0)
            ));
        }
        None
    }
}

impl std::fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(
            f,
            "m <= n ({} <= {}): {}",
            self.m,
            self.n,
            mark(self.m_le_n)
        )?;
        write!(f, "full row rank: {}", mark(self.full_row_rank))?;
        if let Some(r) = self.rank_failure_row {
            write!(f, " (pivot {r})")?;
        }
        writeln!(f)?;
        write!(f, "nonnegative entries: {}", mark(self.nonnegative()))?;
        if !self.negative_entries.is_empty() {
            let shown: Vec<String> = self
                .negative_entries
                .iter()
                .take(10)
                .map(|(i, j)| format!("({i},{j})"))
                .collect();
            write!(f, " at {}", shown.join(" "))?;
            if self.negative_entries.len() > 10 {
                write!(f, " and {} more", self.negative_entries.len() - 10)?;
            }
        }
        writeln!(f)?;
        write!(f, "no zero rows: {}", mark(self.zero_rows.is_empty()))?;
        if !self.zero_rows.is_empty() {
            write!(f, " (rows {:?})", self.zero_rows)?;
        }
        Ok(())
    }
}

pub fn check_matrix_assumptions(matrix: &Matrix) -> AssumptionReport {
    let (m, n) = (matrix.nrows(), matrix.ncols());
    let negative_entries = matrix
        .rows()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v < 0.0)
                .map(move |(j, _)| (i, j))
        })
        .collect();
    let zero_rows = matrix
        .row_norms_sq()
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| (s == 0.0).then_some(i))
        .collect();
    let rank_failure_row = match GramFactor::new(&matrix.gram(), m, DEFAULT_RANK_TOL) {
        Ok(_) => None,
        Err(LinalgError::RankDeficient { pivot, .. }) => Some(pivot),
        Err(_) => Some(0),
    };
    AssumptionReport {
        m,
        n,
        m_le_n: m <= n,
        full_row_rank: rank_failure_row.is_none(),
        rank_failure_row,
        negative_entries,
        zero_rows,
    }
}

/// `√n · C`: bounds `‖x_LS‖` when some solution lies in the box `[0, C]ⁿ`.
pub fn bound_from_box(n: usize, c: f64) -> f64 {
    debug_assert!(c >= 0.0);
    (n as f64).sqrt() * c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitializerSpec {
    /// `M >= ‖x_LS‖`
    pub bound: f64,
    /// `M_i = max_j A_ij`
    pub row_maxima: Vec<f64>,
    pub delta: f64,
    pub beta: Vec<f64>,
    /// `Aᵀ β`
    pub x0: Vec<f64>,
    /// `‖x_LS‖` as computed during validation.
    pub min_norm: f64,
}

/// Builds `x⁰ = Σ β_i A_i` with `β_i = (1 + delta) · bound / max_j A_ij`.
pub fn construct_x0(
    system: &LinearSystem,
    bound: f64,
    delta: f64,
) -> Result<InitializerSpec, HypothesisError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(HypothesisError::InvalidMargin(delta));
    }
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(HypothesisError::AssumptionViolated(format!(
            "bound M must be finite and nonnegative (got {bound})"
        )));
    }
    let matrix = system.matrix();
    if matrix.nrows() > matrix.ncols() {
        return Err(HypothesisError::AssumptionViolated(format!(
            "need m <= n, got m = {} > n = {}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    for (i, row) in matrix.rows().enumerate() {
        if let Some(j) = row.iter().position(|&v| v < 0.0) {
            return Err(HypothesisError::AssumptionViolated(format!(
                "negative entry at ({i}, {j})"
            )));
        }
    }
    let min_norm = linalg::norm(&system.min_norm_solution()?);
    if bound < min_norm {
        return Err(HypothesisError::BoundTooSmall {
            bound,
            norm: min_norm,
        });
    }
    // rows are nonzero and nonnegative, so every maximum is positive
    let row_maxima: Vec<f64> = matrix
        .rows()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let beta: Vec<f64> = row_maxima
        .iter()
        .map(|mi| (1.0 + delta) * bound / mi)
        .collect();
    let x0 = matrix.tr_mul_vec(&beta);
    Ok(InitializerSpec {
        bound,
        row_maxima,
        delta,
        beta,
        x0,
        min_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// `γ` with `Σ γ_i A_i = P_R(x⁰) − x_LS`.
    pub gamma: Vec<f64>,
    /// Every `γ_i > pos_tol`.
    pub all_positive: bool,
    pub min_gamma: f64,
    pub pos_tol: f64,
    pub decomposition_residual: f64,
}

pub fn check_hypothesis(
    system: &LinearSystem,
    x0: &[f64],
) -> Result<HypothesisReport, LinalgError> {
    let v = linalg::sub(&system.project_row_space(x0)?, &system.min_norm_solution()?);
    let decomposition = system.decompose_in_row_space(&v)?;
    let gamma = decomposition.coefficients;
    let min_gamma = gamma.iter().copied().fold(f64::INFINITY, f64::min);
    let pos_tol = POS_TOL_REL * linalg::norm_inf(&gamma);
    Ok(HypothesisReport {
        all_positive: gamma.iter().all(|&g| g > pos_tol),
        min_gamma,
        pos_tol,
        decomposition_residual: decomposition.reconstruction_residual,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn assumptions_identity() {
        let r = check_matrix_assumptions(&Matrix::identity(2));
        assert!(r.passes());
        assert_eq!(r.first_failure(), None);
    }

    #[test]
    fn assumptions_negative_entry() {
        let r = check_matrix_assumptions(&Matrix::from_rows(&[[1.0, -1.0], [0.0, 1.0]]).unwrap());
        assert!(!r.nonnegative());
        assert_eq!(r.negative_entries, vec![(0, 1)]);
        assert!(r.full_row_rank);
        assert!(!r.passes());
    }

    #[test]
    fn assumptions_rank() {
        let r = check_matrix_assumptions(&Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0]]).unwrap());
        assert!(!r.full_row_rank);
        assert_eq!(r.rank_failure_row, Some(1));
        assert!(r.first_failure().unwrap().contains("full row rank"));
    }

    #[test]
    fn assumptions_zero_row_and_shape() {
        let r = check_matrix_assumptions(&Matrix::from_rows(&[[1.0], [0.0], [2.0]]).unwrap());
        assert!(!r.m_le_n);
        assert_eq!(r.zero_rows, vec![1]);
        assert!(!r.full_row_rank);
        let text = r.to_string();
        assert!(text.contains("no zero rows: FAIL"));
    }

    #[test]
    fn box_bound() {
        assert_eq!(bound_from_box(4, 1.0), 2.0);
        assert_eq!(bound_from_box(1, 0.0), 0.0);
        assert!((bound_from_box(2, 2.0) - 2.828_427_124_746_19).abs() < 1e-15);
    }

    #[test]
    fn construct_identity() {
        let s = LinearSystem::new(Matrix::identity(2), vec![1.0, 2.0]).unwrap();
        let spec = construct_x0(&s, 3.0, 0.1).unwrap();
        assert!(close(&spec.beta, &[3.3, 3.3], 1e-15));
        assert!(close(&spec.x0, &[3.3, 3.3], 1e-15));
        let h = check_hypothesis(&s, &spec.x0).unwrap();
        assert!(close(&h.gamma, &[2.3, 1.3], 1e-14));
        assert!(h.all_positive);
    }

    #[test]
    fn construct_scaled_diagonal() {
        let s = LinearSystem::from_rows(&[[2.0, 0.0], [0.0, 4.0]], &[2.0, 4.0]).unwrap();
        let spec = construct_x0(&s, 2.0, 1.0).unwrap();
        assert_eq!(spec.row_maxima, vec![2.0, 4.0]);
        assert!(close(&spec.beta, &[2.0, 1.0], 1e-15));
        assert!(close(&spec.x0, &[4.0, 4.0], 1e-15));
        assert!(check_hypothesis(&s, &spec.x0).unwrap().all_positive);
    }

    #[test]
    fn construct_rejections() {
        let s = LinearSystem::new(Matrix::identity(2), vec![1.0, 2.0]).unwrap();
        assert_eq!(
            construct_x0(&s, 3.0, 0.0),
            Err(HypothesisError::InvalidMargin(0.0))
        );
        assert!(matches!(
            construct_x0(&s, 2.0, 0.1),
            Err(HypothesisError::BoundTooSmall { .. })
        ));
        let s = LinearSystem::from_rows(&[[1.0, -1.0], [0.0, 1.0]], &[0.0, 1.0]).unwrap();
        assert!(matches!(
            construct_x0(&s, 10.0, 0.1),
            Err(HypothesisError::AssumptionViolated(_))
        ));
        let s = LinearSystem::from_rows(&[[1.0, 1.0], [2.0, 2.0]], &[1.0, 2.0]).unwrap();
        assert!(matches!(
            construct_x0(&s, 10.0, 0.1),
            Err(HypothesisError::Linalg(LinalgError::RankDeficient { .. }))
        ));
        let s = LinearSystem::from_rows(&[[1.0], [2.0]], &[1.0, 2.0]).unwrap();
        assert!(matches!(
            construct_x0(&s, 10.0, 0.1),
            Err(HypothesisError::AssumptionViolated(_))
        ));
    }

    #[test]
    fn hypothesis_examples() {
        let s = LinearSystem::new(Matrix::identity(2), vec![1.0, 2.0]).unwrap();
        let h = check_hypothesis(&s, &[5.0, 5.0]).unwrap();
        assert!(close(&h.gamma, &[4.0, 3.0], 1e-15));
        assert!(h.all_positive);

        let h = check_hypothesis(&s, &[0.0, 0.0]).unwrap();
        assert!(close(&h.gamma, &[-1.0, -2.0], 1e-15));
        assert!(!h.all_positive);
        assert_eq!(h.min_gamma, -2.0);

        let h = check_hypothesis(&s, &[1.0, 2.0]).unwrap();
        assert_eq!(h.gamma, vec![0.0, 0.0]);
        assert!(!h.all_positive);
    }
}
