//! Mixed-integer linear programming layer.
//!
//! [`ir`] holds the solver-independent model form (variables, rows,
//! indicator constraints) plus the big-M lowering and an LP-format writer.
//! [`simplex`] is a bounded-variable two-phase primal simplex used for the
//! relaxations, and [`bnb`] the deterministic branch-and-bound solver that
//! implements [`adapter::SolverAdapter`]. Indicator constraints are either
//! handled natively by branching or lowered to big-M rows; both paths are
//! kept because their agreement is part of the test suite.

pub mod adapter;
pub mod bnb;
pub mod ir;
pub mod simplex;

pub use adapter::{Capabilities, SolveOptions, SolveOutcome, SolveStatus, SolverAdapter};
pub use bnb::BranchBoundSolver;
pub use ir::{linearize_indicator, IndicatorMode, Model, RowOp, VarId, VarKind};
