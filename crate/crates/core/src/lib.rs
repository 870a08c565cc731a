//! Planning toolkit for CO2 pipeline networks.
//!
//! The crate builds geographically realistic candidate graphs from a penalty
//! raster (least-cost routing between Delaunay-triangulated emitters and
//! sinks), converts pipeline flows into diameters and capital costs with a
//! piecewise-linear trend approximation, and solves three optimization models
//! over the candidate graph:
//!
//! * perfect information (`m1`): both investment periods are planned jointly
//!   for a known demand scenario,
//! * successive information (`m2`): the first period is built for the initial
//!   scenario only and upgraded once the realized scenario is revealed,
//! * min-max regret: one first-period plan that minimizes the worst-case
//!   regret against the perfect-information optima over all scenarios.
//!
//! Period-1 upgrades are looping (parallel or new lines) and pressure
//! increases on existing lines. Everything is driven from a single TOML run
//! configuration; see the `cli` module and the README for the command-line
//! workflow.

pub mod config;
pub mod economics;
pub mod engine;
pub mod export;
pub mod graph;
pub mod hydraulics;
pub mod layers;
pub mod milp;
pub mod raster;
pub mod report;
pub mod route;
pub mod scenario;
pub mod trends;
pub mod triangulate;

pub mod cli;

pub use engine::{PlanSolution, PlanningInstance};
pub use graph::CandidateGraph;
pub use raster::RasterMap;
pub use scenario::{HorizonParams, ScenarioSet};
pub use trends::Trend;
