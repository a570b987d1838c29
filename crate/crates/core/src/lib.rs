//! Kaczmarz row-action solver with pluggable projection-index controls.
//!
//! The crate solves consistent systems `A x = b` by successive orthogonal
//! projections onto the hyperplanes `⟨A_i, x⟩ = b_i`, choosing the row at
//! each step with a cyclic, random, maximal-residual or maximal-distance
//! control. Alongside the solver it provides the tools to study which rows
//! the maximal-residual control visits:
//!
//! * [`linalg`]: system type, minimal-norm solution, row-space and null-space
//!   projections through the Gram matrix.
//! * [`controls`]: the selection rules, window verification and first-hit
//!   bookkeeping.
//! * [`solver`]: the iteration engine and the predicted limit
//!   `P_N(x⁰) + x_LS`.
//! * [`hypothesis`]: row-space coefficients of `P_R(x⁰) − x_LS` and the
//!   initializer that makes them all positive.
//! * [`problems`]: CT-like test systems and MatrixMarket / text I/O.
//! * [`cli`]: the `kaczmarz` experiment runner.
//!
//! Row indices are zero-based everywhere.

pub mod cli;
pub mod controls;
pub mod hypothesis;
pub mod linalg;
pub mod problems;
pub mod solver;

pub use controls::{ControlKind, ControlStrategy, ControlTrace};
pub use hypothesis::{check_hypothesis, construct_x0, HypothesisReport, InitializerSpec};
pub use linalg::{LinalgError, LinearSystem, Matrix};
pub use problems::{generate_ct_like, GeneratorConfig};
pub use solver::{coverage_report, predicted_limit, run, RunConfig, RunTrace, SolverState};
