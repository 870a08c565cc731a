//! Backend-neutral solver interface.

use super::ir::{Model, VarId};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("model error: {0}")]
    Model(#[from] super::ir::ModelError),
    #[error("warm start incompatible with the model: {0}")]
    IncompatibleWarmStart(String),
    #[error("linear algebra stalled; the model is numerically hostile")]
    Numerics,
}

/// What a backend can do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub native_indicators: bool,
    pub warm_start: bool,
}

/// Options every backend accepts.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    /// Terminate once (incumbent - bound) / |incumbent| drops below this.
    pub rel_gap: f64,
    /// Worker threads the backend may use internally (advisory).
    pub threads: usize,
    /// Seed for backend randomization; the bundled solver is deterministic
    /// and ignores it.
    pub seed: u64,
    pub node_limit: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            rel_gap: 0.0,
            threads: 1,
            seed: 0,
            node_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    /// Incumbent proven within the requested gap.
    Optimal,
    /// Incumbent available but the search stopped early (node limit).
    Feasible,
    Infeasible,
    /// Time budget exhausted; best incumbent reported if one exists.
    TimeLimit,
}

/// Result of a solve: status, incumbent and bound.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Incumbent objective (includes the model's objective offset).
    pub objective: Option<f64>,
    /// Proven lower bound on the optimum (same offset convention).
    pub best_bound: f64,
    /// Values per variable of the incumbent, empty without one.
    pub values: Vec<f64>,
    /// Relative gap of the incumbent, when one exists.
    pub gap: Option<f64>,
    pub nodes: usize,
}

/// A (partial) assignment used to seed the search.
pub type WarmStart = Vec<(VarId, f64)>;

/// Interface every MILP backend implements.
pub trait SolverAdapter {
    fn name(&self) -> &str;
    fn capabilities(&self) -> Capabilities;
    fn solve(
        &self,
        model: &Model,
        options: &SolveOptions,
        warm: Option<&WarmStart>,
    ) -> Result<SolveOutcome, SolveError>;
}
