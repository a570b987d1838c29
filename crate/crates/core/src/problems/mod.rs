//! Test problems and their file formats.
//!
//! [`generate_ct_like`] builds synthetic systems with the sign and bound
//! structure of tomographic scanning matrices: sparse, entrywise nonnegative,
//! no zero rows, full row rank, and a right-hand side `b = A z` for a
//! solution `z` in the box `[0, C]ⁿ`. The minimal-norm solution then
//! satisfies `‖x_LS‖ <= ‖z‖ <= √n · C`.

pub mod io;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{GramFactor, LinalgError, LinearSystem, Matrix, DEFAULT_RANK_TOL};

pub use io::{
    load_matrix, load_vector, parse_matrix_market, parse_vector, save_matrix, save_vector,
    write_matrix_market, write_vector,
};

/// Row regenerations allowed before giving up on full row rank.
pub const RANK_RETRY_LIMIT: usize = 100;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
    #[error("could not reach full row rank after {0} row regenerations")]
    RankRetryExhausted(usize),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub m: usize,
    pub n: usize,
    /// Fraction of nonzero entries per row.
    pub density: f64,
    /// Box bound on the generated solution components.
    pub c: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |msg: String| Err(ProblemError::InvalidConfig(msg));
        if self.m == 0 || self.n == 0 {
            return bad(format!(
                "m and n must be positive (got m={}, n={})",
                self.m, self.n
            ));
        }
        if self.m > self.n {
            return bad(format!("need m <= n (got m={}, n={})", self.m, self.n));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density must lie in (0, 1] (got {})", self.density));
        }
        if self.density * (self.n as f64) < 1.0 - 1e-12 {
            return bad(format!(
                "density * n must be at least 1 (got {} * {})",
                self.density, self.n
            ));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("C must be positive and finite (got {})", self.c));
        }
        Ok(())
    }

    /// Nonzeros placed in each row.
    pub fn nonzeros_per_row(&self) -> usize {
        ((self.density * self.n as f64).round() as usize).clamp(1, self.n)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub system: LinearSystem,
    /// The box-bounded solution used to form `b`.
    pub z: Vec<f64>,
}

fn fill_row(row: &mut [f64], nnz: usize, rng: &mut ChaCha8Rng) {
    row.iter_mut().for_each(|v| *v = 0.0);
    for j in index::sample(rng, row.len(), nnz) {
        // (0, 1]: never an explicit zero on the sparsity pattern
        row[j] = 1.0 - rng.gen::<f64>();
    }
}

/// Generates a CT-like consistent system from `config`.
///
/// Each row gets `round(density · n)` nonzeros (at least one) at uniformly
/// chosen columns with values uniform in `(0, 1]`. Rows that make the Gram
/// matrix singular are regenerated, at most [`RANK_RETRY_LIMIT`] times in
/// total.
pub fn generate_ct_like(config: &GeneratorConfig) -> Result<GeneratedProblem, ProblemError> {
    config.validate()?;
    let (m, n) = (config.m, config.n);
    let nnz = config.nonzeros_per_row();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut data = vec![0.0; m * n];
    for row in data.chunks_exact_mut(n) {
        fill_row(row, nnz, &mut rng);
    }

    let mut retries = 0;
    let matrix = loop {
        let matrix = Matrix::from_row_major(m, n, data.clone())?;
        match GramFactor::new(&matrix.gram(), m, DEFAULT_RANK_TOL) {
            Ok(_) => break matrix,
            Err(LinalgError::RankDeficient { pivot, .. }) => {
                if retries == RANK_RETRY_LIMIT {
                    return Err(ProblemError::RankRetryExhausted(retries));
                }
                retries += 1;
                log::debug!(
                    "seed {}: regenerating row {pivot} (retry {retries})",
                    config.seed
                );
                fill_row(&mut data[pivot * n..(pivot + 1) * n], nnz, &mut rng);
            }
            Err(e) => return Err(e.into()),
        }
    };

    let z: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=config.c)).collect();
    let b = matrix.mul_vec(&z);
    let system = LinearSystem::new(matrix, b)?;
    Ok(GeneratedProblem { system, z })
}
