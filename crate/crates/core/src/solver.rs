//! The Kaczmarz iteration engine.
//!
//! One iteration projects the current iterate onto the hyperplane
//! `H_i = {x : ⟨A_i, x⟩ = b_i}` of the selected row:
//!
//! ```text
//! x ← x − ((⟨x, A_i⟩ − b_i) / ‖A_i‖²) · A_i
//! ```
//!
//! The residual `r = A x − b` is kept alongside the iterate, because the
//! greedy controls read all of it every iteration and the stopping rule is
//! `max_i |r_i| <= stop_tol`. It is maintained either by a full recompute
//! (`O(mn)` per iteration) or incrementally through the Gram matrix
//! (`r ← r − λ·(A Aᵀ)_i`, `O(m)` per iteration after an `O(m²n)` setup),
//! with a periodic full resync to bound drift.
//!
//! For a consistent full-row-rank system every control considered here drives
//! the iterates to `P_N(x⁰) + x_LS`; [`predicted_limit`] computes that point
//! and [`run`] can track the distance to it.

use serde::Serialize;

use crate::controls::{ControlKind, ControlStrategy, ControlTrace};
use crate::linalg::{self, LinalgError, LinearSystem};

/// Above this many rows the Gram matrix is not worth building by default.
pub const INCREMENTAL_MAX_ROWS: usize = 2_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    x: Vec<f64>,
    k: usize,
    residual: Vec<f64>,
}

impl SolverState {
    pub fn new(system: &LinearSystem, x0: &[f64]) -> Result<Self, LinalgError> {
        if x0.len() != system.ncols() {
            return Err(LinalgError::DimensionMismatch {
                what: "initial iterate length",
                expected: system.ncols(),
                got: x0.len(),
            });
        }
        Ok(SolverState {
            x: x0.to_vec(),
            k: 0,
            residual: system.residual(x0),
        })
    }

    /// Builds a state without checking that `residual` matches `x`.
    pub fn from_parts(x: Vec<f64>, k: usize, residual: Vec<f64>) -> Self {
        SolverState { x, k, residual }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn max_abs_residual(&self) -> f64 {
        linalg::norm_inf(&self.residual)
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    /// Recomputes `r = A x − b` from scratch.
    pub fn resync(&mut self, system: &LinearSystem) {
        self.residual = system.residual(&self.x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualMode {
    /// Incremental for `m <= INCREMENTAL_MAX_ROWS`, otherwise recompute.
    #[default]
    Auto,
    Recompute,
    Incremental,
}

impl ResidualMode {
    pub fn resolve(self, m: usize) -> ResidualMode {
        match self {
            ResidualMode::Auto if m <= INCREMENTAL_MAX_ROWS => ResidualMode::Incremental,
            ResidualMode::Auto => ResidualMode::Recompute,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub max_iters: usize,
    /// Convergence when `max_i |r_i| <= stop_tol`.
    pub stop_tol: f64,
    pub strategy: ControlKind,
    /// Keep the full index sequence and per-iteration records.
    pub record_trace: bool,
    pub residual_mode: ResidualMode,
    /// Incremental mode recomputes the residual every this many iterations.
    pub resync_interval: usize,
    /// Compute [`predicted_limit`] up front and track the distance to it.
    /// Requires full row rank.
    pub track_limit: bool,
}

impl RunConfig {
    pub fn new(strategy: ControlKind) -> Self {
        RunConfig {
            max_iters: 100_000,
            stop_tol: 1e-10,
            strategy,
            record_trace: false,
            residual_mode: ResidualMode::Auto,
            resync_interval: 10_000,
            track_limit: false,
        }
    }
}

/// One row of the iteration log. `index` is the row projected on at
/// iteration `k`; the remaining fields describe the iterate `x^{k+1}`
/// produced by that projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub index: usize,
    pub max_abs_res: f64,
    pub res_norm2: f64,
    pub dist_to_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub strategy: ControlKind,
    pub m: usize,
    /// Selected indices; empty unless `record_trace` was set.
    pub control_trace: ControlTrace,
    pub records: Vec<IterationRecord>,
    /// First iteration at which each row was selected.
    pub first_hit: Vec<Option<usize>>,
    pub converged: bool,
    pub iterations: usize,
    pub final_x: Vec<f64>,
    pub initial_max_abs_res: f64,
    pub final_max_abs_res: f64,
    pub limit: Option<Vec<f64>>,
    pub initial_dist_to_limit: Option<f64>,
    pub final_dist_to_limit: Option<f64>,
    /// Largest single-iteration increase of the distance to the limit
    /// (`<= 0` means the distance never grew).
    pub max_dist_increase: Option<f64>,
}

/// Projects `state.x` onto the hyperplane of row `i` and updates the
/// residual. Returns the residual component `⟨x, A_i⟩ − b_i` that was
/// removed, evaluated afresh from `x` rather than read from the cache.
pub fn kaczmarz_step(
    state: &mut SolverState,
    system: &LinearSystem,
    i: usize,
    mode: ResidualMode,
) -> f64 {
    let row = system.row(i);
    let r_i = linalg::dot(row, &state.x) - system.rhs()[i];
    let lambda = r_i / system.row_norms_sq()[i];
    linalg::axpy(-lambda, row, &mut state.x);
    state.k += 1;
    match mode.resolve(system.nrows()) {
        ResidualMode::Incremental => {
            let m = system.nrows();
            let g = &system.gram()[i * m..(i + 1) * m];
            linalg::axpy(-lambda, g, &mut state.residual);
        }
        _ => state.resync(system),
    }
    r_i
}

/// `P_N(x⁰) + x_LS`, the point the iteration converges to.
pub fn predicted_limit(system: &LinearSystem, x0: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let pn = system.project_null_space(x0)?;
    let x_ls = system.min_norm_solution()?;
    Ok(linalg::add(&pn, &x_ls))
}

/// Runs the iteration from `x0` until `max_i |r_i| <= stop_tol` or
/// `max_iters` projections have been made.
pub fn run(system: &LinearSystem, x0: &[f64], config: &RunConfig) -> Result<RunTrace, LinalgError> {
    let m = system.nrows();
    let mode = config.residual_mode.resolve(m);
    let limit = if config.track_limit {
        Some(predicted_limit(system, x0)?)
    } else {
        None
    };
    let mut state = SolverState::new(system, x0)?;
    let mut strategy = ControlStrategy::new(config.strategy, system);

    let mut first_hit = vec![None; m];
    let mut indices = Vec::new();
    let mut records = Vec::new();
    let initial_max_abs_res = state.max_abs_residual();
    let initial_dist = limit.as_deref().map(|l| linalg::distance(state.x(), l));
    let mut last_dist = initial_dist;
    let mut max_dist_increase = limit.as_ref().map(|_| f64::NEG_INFINITY);
    let mut since_sync = 0usize;
    let mut converged = false;

    loop {
        if state.max_abs_residual() <= config.stop_tol {
            if mode == ResidualMode::Incremental && since_sync > 0 {
                // do not declare convergence on a drifted cache
                state.resync(system);
                since_sync = 0;
                continue;
            }
            converged = true;
            break;
        }
        if state.k >= config.max_iters {
            break;
        }
        let k = state.k;
        let i = strategy.select(&state, system);
        kaczmarz_step(&mut state, system, i, mode);
        if first_hit[i].is_none() {
            first_hit[i] = Some(k);
        }
        if mode == ResidualMode::Incremental {
            since_sync += 1;
            if config.resync_interval > 0 && since_sync >= config.resync_interval {
                state.resync(system);
                since_sync = 0;
            }
        }
        let dist = limit.as_deref().map(|l| linalg::distance(state.x(), l));
        if let (Some(d), Some(prev), Some(inc)) = (dist, last_dist, max_dist_increase.as_mut()) {
            *inc = inc.max(d - prev);
        }
        last_dist = dist;
        if config.record_trace {
            indices.push(i);
            records.push(IterationRecord {
                k,
                index: i,
                max_abs_res: state.max_abs_residual(),
                res_norm2: linalg::norm(state.residual()),
                dist_to_limit: dist,
            });
        }
    }

    log::debug!(
        "{} run: {} iterations, converged={}, max|r|={:e}",
        config.strategy,
        state.k,
        converged,
        state.max_abs_residual()
    );

    Ok(RunTrace {
        strategy: config.strategy,
        m,
        control_trace: ControlTrace::new(indices),
        records,
        first_hit,
        converged,
        iterations: state.k,
        initial_max_abs_res,
        final_max_abs_res: state.max_abs_residual(),
        final_dist_to_limit: last_dist,
        initial_dist_to_limit: initial_dist,
        max_dist_increase: max_dist_increase.map(|v| if v.is_finite() { v } else { 0.0 }),
        limit,
        final_x: state.into_x(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub covered: bool,
    pub max_first_hit: Option<usize>,
    pub unhit: Vec<usize>,
}

impl CoverageReport {
    pub fn from_first_hit(first_hit: &[Option<usize>]) -> Self {
        let unhit: Vec<usize> = first_hit
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.is_none().then_some(i))
            .collect();
        CoverageReport {
            covered: unhit.is_empty(),
            max_first_hit: first_hit.iter().flatten().copied().max(),
            unhit,
        }
    }
}

pub fn coverage_report(trace: &RunTrace) -> CoverageReport {
    CoverageReport::from_first_hit(&trace.first_hit)
}
