//! The self-describing run configuration.
//!
//! A single TOML file holds the grid, layers (inline synthetic geometry or
//! references to GeoJSON / ASCII-grid files), nodes, scenario demand tables,
//! hydraulic, cost and horizon parameters, trend fitting (or a pinned trend
//! table), solver options and flags. Every artifact a run writes embeds the
//! SHA-256 of the configuration bytes so outputs are traceable to their
//! inputs.

use crate::economics::OmSchedule;
use crate::engine::{CouplingMode, PlanningInstance};
use crate::graph::{CandidateGraph, NodeKind, NodeSpec};
use crate::hydraulics::{CostParams, HydraulicParams};
use crate::layers::{value_grid_from_ascii, GeoLayer, LayerError};
use crate::milp::adapter::SolveOptions;
use crate::milp::bnb::BranchBoundSolver;
use crate::milp::ir::IndicatorMode;
use crate::raster::GridSpec;
use crate::scenario::{HorizonParams, Scenario, ScenarioSet};
use crate::trends::{fit_trends, Trend, TrendError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config invalid: {0}")]
    Validation(String),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Trend(#[from] TrendError),
    #[error("geojson: {0}")]
    GeoJson(String),
}

fn default_trend_count() -> usize {
    3
}

fn default_trend_tol() -> f64 {
    0.02
}

/// Trend fitting parameters, or a pinned table that skips fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendsConfig {
    #[serde(default = "default_trend_count")]
    pub count: usize,
    #[serde(default = "default_trend_tol")]
    pub tolerance: f64,
    /// Upper end of the fitted flow range in Mt/a. Defaults to 120% of the
    /// largest total emissions over all scenarios and periods.
    #[serde(default)]
    pub f_max_mta: Option<f64>,
    /// A pinned trend table overrides fitting entirely.
    #[serde(default)]
    pub pinned: Option<Vec<Trend>>,
}

impl Default for TrendsConfig {
    fn default() -> Self {
        Self {
            count: default_trend_count(),
            tolerance: default_trend_tol(),
            f_max_mta: None,
            pinned: None,
        }
    }
}

fn default_backend() -> String {
    "bnb-native".into()
}

fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// `bnb-native` (indicator branching) or `bnb-bigm` (lowered rows).
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default)]
    pub time_limit_s: Option<u64>,
    #[serde(default)]
    pub rel_gap: f64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: default_backend(),
            time_limit_s: None,
            rel_gap: 0.0,
            threads: default_threads(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Flags {
    /// Read the option flow couplings as capacities instead of equalities.
    #[serde(default)]
    pub relaxed_coupling: bool,
    /// Start period-1 O&M at year n1+1 instead of the printed n1.
    #[serde(default)]
    pub om_no_overlap: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
        }
    }
}

/// One scenario's demand tables as written in the config; `t0` defaults to
/// the initial scenario's table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default)]
    pub t0: Option<BTreeMap<String, f64>>,
    pub t1: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenariosConfig {
    pub initial: String,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioConfig>,
}

/// The full run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridSpec,
    #[serde(default, rename = "layer")]
    pub layers: Vec<GeoLayer>,
    #[serde(default, rename = "node")]
    pub nodes: Vec<NodeSpec>,
    pub scenarios: ScenariosConfig,
    #[serde(default)]
    pub hydraulics: HydraulicParams,
    #[serde(default)]
    pub costs: CostParams,
    #[serde(default)]
    pub horizon: HorizonParams,
    #[serde(default)]
    pub trends: TrendsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A parsed configuration plus the provenance hash of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Hex SHA-256 of the configuration file bytes.
    pub hash: String,
    /// Directory the config was loaded from; file references resolve
    /// against it.
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let hash = hex::encode(Sha256::digest(&bytes));
        let config: RunConfig = toml::from_str(
            std::str::from_utf8(&bytes)
                .map_err(|e| ConfigError::Validation(format!("config is not UTF-8: {e}")))?,
        )?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let loaded = Self {
            config,
            hash,
            base_dir,
        };
        loaded.config.validate()?;
        Ok(loaded)
    }

    /// Layers with file references resolved into inline geometry/grids.
    pub fn resolved_layers(&self) -> Result<Vec<GeoLayer>, ConfigError> {
        let mut layers = self.config.layers.clone();
        for layer in &mut layers {
            if let Some(rel) = layer.grid_path.take() {
                let path = self.base_dir.join(&rel);
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                    path,
                    source,
                })?;
                layer.grid = Some(value_grid_from_ascii(&text)?);
            }
            if let Some(rel) = layer.geojson_path.take() {
                let path = self.base_dir.join(&rel);
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                    path,
                    source,
                })?;
                merge_geojson(layer, &text)?;
            }
        }
        Ok(layers)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        if self.nodes.is_empty() {
            return Err(ConfigError::Validation("no nodes configured".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(&n.id) {
                return Err(ConfigError::Validation(format!(
                    "duplicate node id {}",
                    n.id
                )));
            }
            if n.kind == NodeKind::Transport {
                return Err(ConfigError::Validation(format!(
                    "node {} declared as transport; transport nodes are derived",
                    n.id
                )));
            }
        }
        if !self.nodes.iter().any(|n| n.kind == NodeKind::Emitter) {
            return Err(ConfigError::Validation("no emitter configured".into()));
        }
        if !self.nodes.iter().any(|n| n.kind == NodeKind::Sink) {
            return Err(ConfigError::Validation("no sink configured".into()));
        }
        self.hydraulics
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.costs
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.horizon
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        if self.trends.count < 1 {
            return Err(ConfigError::Validation("trends.count must be >= 1".into()));
        }
        if !(self.trends.tolerance > 0.0) {
            return Err(ConfigError::Validation(
                "trends.tolerance must be positive".into(),
            ));
        }
        match self.solver.backend.as_str() {
            "bnb-native" | "bnb-bigm" => {}
            other => {
                return Err(ConfigError::Validation(format!(
                    "unknown solver backend {other} (available: bnb-native, bnb-bigm)"
                )))
            }
        }
        let roster = self.roster();
        self.scenario_set()
            .validate(&roster)
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        Ok(())
    }

    /// Node kinds by id, before graph construction.
    pub fn roster(&self) -> BTreeMap<String, NodeKind> {
        self.nodes
            .iter()
            .map(|n| (n.id.clone(), n.kind))
            .collect()
    }

    /// The scenario set with period-0 tables defaulted to the initial
    /// scenario's.
    pub fn scenario_set(&self) -> ScenarioSet {
        let initial_t0 = self
            .scenarios
            .scenarios
            .iter()
            .find(|s| s.id == self.scenarios.initial)
            .and_then(|s| s.t0.clone())
            .unwrap_or_default();
        ScenarioSet {
            initial: self.scenarios.initial.clone(),
            scenarios: self
                .scenarios
                .scenarios
                .iter()
                .map(|s| Scenario {
                    id: s.id.clone(),
                    demand_t0: s.t0.clone().unwrap_or_else(|| initial_t0.clone()),
                    demand_t1: s.t1.clone(),
                })
                .collect(),
        }
    }

    /// Largest total emissions over all scenarios and periods, in Mt/a.
    pub fn peak_emissions_mta(&self) -> f64 {
        let set = self.scenario_set();
        set.scenarios
            .iter()
            .flat_map(|s| [&s.demand_t0, &s.demand_t1])
            .map(|table| table.values().filter(|d| **d > 0.0).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// The trend table: pinned from the config, or fitted to the exact cost
    /// curve over `[0, f_max]`.
    pub fn trend_table(&self) -> Result<Vec<Trend>, ConfigError> {
        if let Some(pinned) = &self.trends.pinned {
            if pinned.is_empty() {
                return Err(ConfigError::Validation("pinned trend table empty".into()));
            }
            return Ok(pinned.clone());
        }
        let f_max = self
            .trends
            .f_max_mta
            .unwrap_or_else(|| 1.2 * self.peak_emissions_mta());
        if !(f_max > 0.0) {
            return Err(ConfigError::Validation(
                "cannot derive a positive trend flow ceiling; set trends.f_max_mta".into(),
            ));
        }
        let fit = fit_trends(
            &self.costs,
            &self.hydraulics,
            f_max,
            self.trends.count,
            self.trends.tolerance,
        )?;
        Ok(fit.trends)
    }

    pub fn coupling(&self) -> CouplingMode {
        if self.flags.relaxed_coupling {
            CouplingMode::Relaxed
        } else {
            CouplingMode::Literal
        }
    }

    pub fn om_schedule(&self) -> OmSchedule {
        if self.flags.om_no_overlap {
            OmSchedule::NoOverlap
        } else {
            OmSchedule::Overlap
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            time_limit: self.solver.time_limit_s.map(Duration::from_secs),
            rel_gap: self.solver.rel_gap,
            threads: self.solver.threads,
            seed: self.solver.seed,
            node_limit: None,
        }
    }

    pub fn solver_backend(&self) -> BranchBoundSolver {
        match self.solver.backend.as_str() {
            "bnb-bigm" => BranchBoundSolver {
                indicator_mode: IndicatorMode::BigM,
            },
            _ => BranchBoundSolver {
                indicator_mode: IndicatorMode::Native,
            },
        }
    }

    /// Bundles a built graph with the run parameters into a planning
    /// instance.
    pub fn instance(&self, graph: CandidateGraph) -> Result<PlanningInstance, ConfigError> {
        Ok(PlanningInstance {
            graph,
            trends: self.trend_table()?,
            scenarios: self.scenario_set(),
            horizon: self.horizon,
            coupling: self.coupling(),
            om_schedule: self.om_schedule(),
        })
    }
}

/// Merges GeoJSON geometries into a layer: LineStrings become polylines,
/// Polygon exterior rings become polygons (holes are not modeled).
pub fn merge_geojson(layer: &mut GeoLayer, text: &str) -> Result<(), ConfigError> {
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::GeoJson(e.to_string()))?;
    let features = match doc.get("type").and_then(|t| t.as_str()) {
        Some("FeatureCollection") => doc
            .get("features")
            .and_then(|f| f.as_array())
            .cloned()
            .unwrap_or_default(),
        Some("Feature") => vec![doc.clone()],
        other => {
            return Err(ConfigError::GeoJson(format!(
                "expected FeatureCollection or Feature, got {other:?}"
            )))
        }
    };
    for feature in features {
        let Some(geometry) = feature.get("geometry") else {
            continue;
        };
        merge_geometry(layer, geometry)?;
    }
    Ok(())
}

fn merge_geometry(layer: &mut GeoLayer, geometry: &serde_json::Value) -> Result<(), ConfigError> {
    let kind = geometry
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| ConfigError::GeoJson("geometry without type".into()))?;
    let coords = geometry
        .get("coordinates")
        .ok_or_else(|| ConfigError::GeoJson("geometry without coordinates".into()))?;
    let parse_line = |value: &serde_json::Value| -> Result<Vec<(f64, f64)>, ConfigError> {
        value
            .as_array()
            .ok_or_else(|| ConfigError::GeoJson("expected coordinate array".into()))?
            .iter()
            .map(|pt| {
                let pair = pt
                    .as_array()
                    .filter(|p| p.len() >= 2)
                    .ok_or_else(|| ConfigError::GeoJson("expected [x, y]".into()))?;
                Ok((
                    pair[0].as_f64().unwrap_or(f64::NAN),
                    pair[1].as_f64().unwrap_or(f64::NAN),
                ))
            })
            .collect()
    };
    match kind {
        "LineString" => layer.polylines.push(parse_line(coords)?),
        "MultiLineString" => {
            for line in coords.as_array().into_iter().flatten() {
                layer.polylines.push(parse_line(line)?);
            }
        }
        "Polygon" => {
            if let Some(exterior) = coords.as_array().and_then(|r| r.first()) {
                layer.polygons.push(parse_line(exterior)?);
            }
        }
        "MultiPolygon" => {
            for poly in coords.as_array().into_iter().flatten() {
                if let Some(exterior) = poly.as_array().and_then(|r| r.first()) {
                    layer.polygons.push(parse_line(exterior)?);
                }
            }
        }
        other => {
            return Err(ConfigError::GeoJson(format!(
                "unsupported geometry type {other}"
            )))
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
width = 10
height = 10
cell_size_km = 1.5
origin = [0.0, 0.0]
projection = "synthetic-km"

[[node]]
id = "e1"
kind = "emitter"
x = 1.0
y = 1.0

[[node]]
id = "k1"
kind = "sink"
x = 12.0
y = 12.0

[scenarios]
initial = "S1"

[[scenarios.scenario]]
id = "S1"
t0 = { e1 = 10.0, k1 = -30.0 }
t1 = { e1 = 10.0, k1 = -30.0 }

[[scenarios.scenario]]
id = "S2"
t1 = { e1 = 19.8, k1 = -30.0 }
"#;

    #[test]
    fn minimal_config_parses_and_validates() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.validate().unwrap();
        assert_eq!(config.trends.count, 3);
        let set = config.scenario_set();
        // S2 inherits the initial period-0 table.
        assert_eq!(set.get("S2").unwrap().demand_t0("e1"), 10.0);
        assert!((config.peak_emissions_mta() - 19.8).abs() < 1e-12);
    }

    #[test]
    fn missing_sink_rejected() {
        let text = MINIMAL.replace("kind = \"sink\"", "kind = \"emitter\"");
        let config: RunConfig = toml::from_str(&text).unwrap();
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("sink"), "{err}");
    }

    #[test]
    fn unknown_backend_rejected() {
        let text = format!("{MINIMAL}\n[solver]\nbackend = \"gurobi\"\n");
        let config: RunConfig = toml::from_str(&text).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn trend_table_fits_by_default_and_pins_when_given() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        let fitted = config.trend_table().unwrap();
        // Fitting stops once the tolerance is met, so at most `count` pieces.
        assert!(!fitted.is_empty() && fitted.len() <= 3);
        assert_eq!(fitted[0].q_min, 0.0);
        assert!((fitted.last().unwrap().q_max - 1.2 * 19.8).abs() < 1e-9);

        let pinned = format!(
            "{MINIMAL}\n[trends]\npinned = [{{ slope = 1.0, intercept = 2.0, q_min = 0.0, q_max = 30.0 }}]\n"
        );
        let config: RunConfig = toml::from_str(&pinned).unwrap();
        let table = config.trend_table().unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].intercept, 2.0);
    }

    #[test]
    fn geojson_merges_lines_and_polygons() {
        let mut layer = GeoLayer {
            kind: Some(crate::layers::LayerKind::Water),
            ..GeoLayer::default()
        };
        let text = r#"{
            "type": "FeatureCollection",
            "features": [
                {"type": "Feature", "properties": {},
                 "geometry": {"type": "LineString", "coordinates": [[0.0, 0.0], [3.0, 3.0]]}},
                {"type": "Feature", "properties": {},
                 "geometry": {"type": "Polygon", "coordinates": [[[0,0],[4,0],[4,4],[0,4],[0,0]]]}}
            ]
        }"#;
        merge_geojson(&mut layer, text).unwrap();
        assert_eq!(layer.polylines.len(), 1);
        assert_eq!(layer.polygons.len(), 1);
        assert_eq!(layer.polygons[0].len(), 5);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        let text = toml::to_string(&config).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.nodes.len(), 2);
        assert_eq!(back.scenarios.scenarios.len(), 2);
    }
}
