//! Projection-index controls and the window verifier.
//!
//! Row indices are zero-based throughout: a system with `m` rows has indices
//! `0..m`.
//!
//! Four selection rules are provided:
//!
//! * [`ControlKind::Cyclic`]: `i(k) = k mod m`.
//! * [`ControlKind::Random`]: `i(k) ~ p` with `p_i = ‖A_i‖² / ‖A‖_F²`.
//! * [`ControlKind::MaxResidual`]: `argmax_i |r_i|` (the remotest set control
//!   in its unnormalized form).
//! * [`ControlKind::MaxDistance`]: `argmax_i |r_i| / ‖A_i‖`, the hyperplane
//!   farthest from the current iterate. Differs from `MaxResidual` only when
//!   row norms differ.
//!
//! Ties in both greedy rules go to the lowest index.
//!
//! The random control draws `u` uniform in `[0, 1)` from a ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng::seed_from_u64(seed)`, 53-bit `f64` conversion
//! from `rand` 0.8) and returns the first index whose cumulative weight
//! exceeds `u`. ChaCha is a counter-mode generator, so a seed fixes the index
//! sequence on every platform.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::LinearSystem;
use crate::solver::SolverState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error("malformed windows: {0}")]
    MalformedWindows(String),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    Cyclic,
    Random { seed: u64 },
    MaxResidual,
    MaxDistance,
}

impl ControlKind {
    /// CLI name of the strategy.
    pub fn name(&self) -> &'static str {
        match self {
            ControlKind::Cyclic => "cyclic",
            ControlKind::Random { .. } => "random",
            ControlKind::MaxResidual => "mr",
            ControlKind::MaxDistance => "mr-distance",
        }
    }

    /// Parses a CLI strategy name; `seed` is only used by `random`.
    pub fn parse_with_seed(name: &str, seed: u64) -> Result<Self, UnknownStrategy> {
        match name {
            "cyclic" => Ok(ControlKind::Cyclic),
            "random" => Ok(ControlKind::Random { seed }),
            "mr" => Ok(ControlKind::MaxResidual),
            "mr-distance" => Ok(ControlKind::MaxDistance),
            other => Err(UnknownStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown strategy {0:?} (expected cyclic, random, mr or mr-distance)")]
pub struct UnknownStrategy(pub String);

impl FromStr for ControlKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_with_seed(s, 0)
    }
}

/// A point of the probability simplex over row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityWeights {
    p: Vec<f64>,
}

impl ProbabilityWeights {
    /// `p_i = ‖A_i‖² / ‖A‖_F²` from the cached row norms.
    pub fn from_system(system: &LinearSystem) -> Self {
        let norms = system.row_norms_sq();
        let frob: f64 = norms.iter().sum();
        ProbabilityWeights {
            p: norms.iter().map(|s| s / frob).collect(),
        }
    }

    /// Normalizes arbitrary nonnegative weights. Returns `None` if any weight
    /// is negative or non-finite, or if they sum to zero.
    pub fn from_weights(weights: &[f64]) -> Option<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return None;
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(ProbabilityWeights {
            p: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// Convenience wrapper matching the weights of the random control.
pub fn random_weights(system: &LinearSystem) -> ProbabilityWeights {
    ProbabilityWeights::from_system(system)
}

/// Inverse-CDF sampler over fixed weights, driven by a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct WeightedSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
    rng: ChaCha8Rng,
}

impl WeightedSampler {
    pub fn new(weights: &ProbabilityWeights, seed: u64) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .as_slice()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = weights
            .as_slice()
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0);
        WeightedSampler {
            cumulative,
            last_positive,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn draw(&mut self) -> usize {
        let u: f64 = self.rng.gen();
        let i = self.cumulative.partition_point(|&c| c <= u);
        // rounding can leave the final cumulative sum a hair below 1
        i.min(self.last_positive)
    }
}

/// Index of the largest `|r_i|`, lowest index on ties.
pub fn argmax_abs(r: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in r.iter().enumerate() {
        let a = v.abs();
        if a > best_val {
            best = i;
            best_val = a;
        }
    }
    best
}

/// Index of the largest `|r_i| * inv_norms[i]`, lowest index on ties.
pub fn argmax_scaled(r: &[f64], inv_norms: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, (v, s)) in r.iter().zip(inv_norms).enumerate() {
        let a = v.abs() * s;
        if a > best_val {
            best = i;
            best_val = a;
        }
    }
    best
}

/// A control instance bound to one system. Holds the RNG for the random kind,
/// so one instance must not be shared between runs.
#[derive(Debug, Clone)]
pub struct ControlStrategy {
    kind: ControlKind,
    sampler: Option<WeightedSampler>,
    inv_norms: Vec<f64>,
}

impl ControlStrategy {
    pub fn new(kind: ControlKind, system: &LinearSystem) -> Self {
        let sampler = match kind {
            ControlKind::Random { seed } => {
                Some(WeightedSampler::new(&random_weights(system), seed))
            }
            _ => None,
        };
        let inv_norms = match kind {
            ControlKind::MaxDistance => system
                .row_norms_sq()
                .iter()
                .map(|s| 1.0 / s.sqrt())
                .collect(),
            _ => Vec::new(),
        };
        ControlStrategy {
            kind,
            sampler,
            inv_norms,
        }
    }

    pub fn kind(&self) -> ControlKind {
        self.kind
    }

    pub fn select(&mut self, state: &SolverState, system: &LinearSystem) -> usize {
        match self.kind {
            ControlKind::Cyclic => state.k() % system.nrows(),
            ControlKind::Random { .. } => self
                .sampler
                .as_mut()
                .expect("random control always carries a sampler")
                .draw(),
            ControlKind::MaxResidual => argmax_abs(state.residual()),
            ControlKind::MaxDistance => argmax_scaled(state.residual(), &self.inv_norms),
        }
    }
}

/// The index sequence `i(0), i(1), …` and optional window boundaries
/// `τ_0 < τ_1 < …`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControlTrace {
    pub indices: Vec<usize>,
    pub windows: Option<Vec<usize>>,
}

impl ControlTrace {
    pub fn new(indices: Vec<usize>) -> Self {
        ControlTrace {
            indices,
            windows: None,
        }
    }

    pub fn with_windows(mut self, windows: Vec<usize>) -> Self {
        self.windows = Some(windows);
        self
    }
}

/// `τ_k = k·m` for every complete window of a trace of length `len`.
pub fn cyclic_windows(len: usize, m: usize) -> Vec<usize> {
    assert!(m > 0);
    (0..=len / m).map(|k| k * m).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowViolation {
    pub window: usize,
    pub start: usize,
    pub end: usize,
    pub missing: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowReport {
    /// Every window contains all `m` indices.
    pub valid: bool,
    pub first_violation: Option<WindowViolation>,
    pub window_count: usize,
    pub lengths: Vec<usize>,
    pub max_length: usize,
    /// `Some(max_length <= bound)` when a bound was supplied.
    pub bounded: Option<bool>,
}

/// Checks that each window `[τ_k, τ_{k+1})` of the trace visits every index
/// in `0..m`.
///
/// The windows must start at or after position 0, be strictly increasing and
/// end within the trace; positions past the last boundary are not checked.
pub fn verify_windows(
    trace: &ControlTrace,
    m: usize,
    length_bound: Option<usize>,
) -> Result<WindowReport, ControlError> {
    if m == 0 {
        return Err(ControlError::MalformedTrace("m must be at least 1".into()));
    }
    if let Some((pos, &i)) = trace.indices.iter().enumerate().find(|(_, &i)| i >= m) {
        return Err(ControlError::MalformedTrace(format!(
            "index {i} at position {pos} is out of range for m = {m}"
        )));
    }
    let tau = trace
        .windows
        .as_deref()
        .ok_or_else(|| ControlError::MalformedWindows("no window boundaries given".into()))?;
    if tau.len() < 2 {
        return Err(ControlError::MalformedWindows(format!(
            "need at least two boundaries, got {}",
            tau.len()
        )));
    }
    if let Some(k) = tau.windows(2).position(|w| w[1] <= w[0]) {
        return Err(ControlError::MalformedWindows(format!(
            "boundaries not strictly increasing at k = {k} ({} then {})",
            tau[k],
            tau[k + 1]
        )));
    }
    let last = *tau.last().unwrap();
    if last > trace.indices.len() {
        return Err(ControlError::MalformedWindows(format!(
            "last boundary {last} exceeds trace length {}",
            trace.indices.len()
        )));
    }

    let mut seen = vec![false; m];
    let mut first_violation = None;
    let mut lengths = Vec::with_capacity(tau.len() - 1);
    for (k, w) in tau.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        lengths.push(end - start);
        if first_violation.is_some() {
            continue;
        }
        seen.iter_mut().for_each(|s| *s = false);
        for &i in &trace.indices[start..end] {
            seen[i] = true;
        }
        let missing: Vec<usize> = (0..m).filter(|&i| !seen[i]).collect();
        if !missing.is_empty() {
            first_violation = Some(WindowViolation {
                window: k,
                start,
                end,
                missing,
            });
        }
    }
    let max_length = lengths.iter().copied().max().unwrap_or(0);
    Ok(WindowReport {
        valid: first_violation.is_none(),
        first_violation,
        window_count: lengths.len(),
        lengths,
        max_length,
        bounded: length_bound.map(|b| max_length <= b),
    })
}

/// For each index in `0..m`, the first position where it was selected, or
/// `None` if it never was. Entries `>= m` in the trace are ignored.
pub fn first_hit_iterations(indices: &[usize], m: usize) -> Vec<Option<usize>> {
    let mut hits = vec![None; m];
    let mut remaining = m;
    for (t, &i) in indices.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if let Some(slot @ None) = hits.get_mut(i) {
            *slot = Some(t);
            remaining -= 1;
        }
    }
    hits
}
