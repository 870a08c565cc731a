//! Demand scenarios and planning-horizon parameters.
//!
//! A scenario carries nodal demands for both investment periods: positive for
//! emitters, negative for sinks (capacity), zero or absent for everything
//! else. Stage-one planning always uses the initial scenario's period-0
//! table; the other scenarios differ in what joins the system in period 1.

use crate::graph::NodeKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("scenario {scenario}: unknown node id {node}")]
    UnknownNode { scenario: String, node: String },
    #[error("duplicate scenario id {0}")]
    DuplicateScenario(String),
    #[error("initial scenario {0} is not part of the scenario set")]
    MissingInitial(String),
    #[error(
        "scenario {scenario} period {period}: emitter demand {emitters} Mt/a \
         exceeds sink capacity {capacity} Mt/a"
    )]
    SinkCapacityShortfall {
        scenario: String,
        period: u8,
        emitters: f64,
        capacity: f64,
    },
    #[error("scenario {scenario}: {node} is {kind:?} but has demand {demand}")]
    DemandSignMismatch {
        scenario: String,
        node: String,
        kind: NodeKind,
        demand: f64,
    },
    #[error("invalid horizon parameters: {0}")]
    InvalidHorizon(String),
    #[error("scenario set is empty")]
    Empty,
}

/// Planning-horizon economics shared by all optimization models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonParams {
    /// Years between the first and the second investment decision (n1).
    pub years_to_second_stage: u32,
    /// Years between the first investment and the end of the horizon (n2).
    pub planning_years: u32,
    /// Annual discount rate.
    pub discount_rate: f64,
    /// Annual operation and maintenance cost as a fraction of the cumulative
    /// investment.
    pub om_fraction: f64,
    /// Capacity factor gained by a pressure increase on an existing line (> 1).
    pub pressure_uplift: f64,
    /// Pressure-increase cost as a fraction of the arc's original capex.
    pub pressure_cost_fraction: f64,
}

impl Default for HorizonParams {
    fn default() -> Self {
        Self {
            years_to_second_stage: 5,
            planning_years: 25,
            discount_rate: 0.05,
            om_fraction: 0.025,
            pressure_uplift: 1.2,
            pressure_cost_fraction: 0.3,
        }
    }
}

impl HorizonParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.years_to_second_stage == 0 || self.years_to_second_stage >= self.planning_years {
            return Err(ScenarioError::InvalidHorizon(format!(
                "need 0 < n1 < n2, got n1={} n2={}",
                self.years_to_second_stage, self.planning_years
            )));
        }
        if !(self.discount_rate >= 0.0 && self.discount_rate.is_finite()) {
            return Err(ScenarioError::InvalidHorizon(format!(
                "discount rate must be non-negative, got {}",
                self.discount_rate
            )));
        }
        if !(self.om_fraction >= 0.0 && self.om_fraction.is_finite()) {
            return Err(ScenarioError::InvalidHorizon(format!(
                "O&M fraction must be non-negative, got {}",
                self.om_fraction
            )));
        }
        if !(self.pressure_uplift > 1.0 && self.pressure_uplift.is_finite()) {
            return Err(ScenarioError::InvalidHorizon(format!(
                "pressure uplift must exceed 1, got {}",
                self.pressure_uplift
            )));
        }
        if !(self.pressure_cost_fraction > 0.0 && self.pressure_cost_fraction.is_finite()) {
            return Err(ScenarioError::InvalidHorizon(format!(
                "pressure cost fraction must be positive, got {}",
                self.pressure_cost_fraction
            )));
        }
        Ok(())
    }

    /// Fraction of period-1 capex written off inside the horizon: (n2-n1)/n2.
    pub fn proration(&self) -> f64 {
        (self.planning_years - self.years_to_second_stage) as f64 / self.planning_years as f64
    }
}

/// Nodal demands of one scenario for both periods, in Mt/a.
///
/// Nodes absent from a table have zero demand in that period, which is how
/// emitters that only exist in other scenarios are represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    /// Period-0 demand per node id.
    pub demand_t0: BTreeMap<String, f64>,
    /// Period-1 demand per node id.
    pub demand_t1: BTreeMap<String, f64>,
}

impl Scenario {
    pub fn demand_t0(&self, node: &str) -> f64 {
        self.demand_t0.get(node).copied().unwrap_or(0.0)
    }

    pub fn demand_t1(&self, node: &str) -> f64 {
        self.demand_t1.get(node).copied().unwrap_or(0.0)
    }
}

/// The full scenario set with its designated initial scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub initial: String,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn get(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn initial_scenario(&self) -> &Scenario {
        self.get(&self.initial)
            .expect("validated sets contain their initial scenario")
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.scenarios.iter().map(|s| s.id.as_str())
    }

    /// Stage-one demand of a node: the initial scenario's period-0 demand.
    pub fn stage_one_demand(&self, node: &str) -> f64 {
        self.initial_scenario().demand_t0(node)
    }

    /// Nodes whose period-1 demand in scenario `id` differs from the initial
    /// scenario's period-0 demand, in deterministic (sorted) order.
    pub fn scenario_delta(&self, id: &str) -> Vec<String> {
        let base = &self.initial_scenario().demand_t0;
        let Some(s) = self.get(id) else {
            return Vec::new();
        };
        let mut nodes: Vec<String> = s
            .demand_t1
            .iter()
            .filter(|(node, &d)| base.get(*node).copied().unwrap_or(0.0) != d)
            .map(|(node, _)| node.clone())
            .collect();
        for (node, &d) in base {
            if d != 0.0 && !s.demand_t1.contains_key(node) {
                nodes.push(node.clone());
            }
        }
        nodes.sort();
        nodes.dedup();
        nodes
    }

    /// Validates the set against the node roster of the candidate graph.
    pub fn validate(&self, roster: &BTreeMap<String, NodeKind>) -> Result<(), ScenarioError> {
        if self.scenarios.is_empty() {
            return Err(ScenarioError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.scenarios {
            if !seen.insert(&s.id) {
                return Err(ScenarioError::DuplicateScenario(s.id.clone()));
            }
        }
        if self.get(&self.initial).is_none() {
            return Err(ScenarioError::MissingInitial(self.initial.clone()));
        }
        for s in &self.scenarios {
            for (period, table) in [(0u8, &s.demand_t0), (1u8, &s.demand_t1)] {
                let mut emitted = 0.0;
                let mut capacity = 0.0;
                for (node, &demand) in table {
                    let kind =
                        roster
                            .get(node)
                            .copied()
                            .ok_or_else(|| ScenarioError::UnknownNode {
                                scenario: s.id.clone(),
                                node: node.clone(),
                            })?;
                    let sign_ok = match kind {
                        NodeKind::Emitter => demand >= 0.0,
                        NodeKind::Sink => demand <= 0.0,
                        NodeKind::Transport => demand == 0.0,
                    };
                    if !sign_ok {
                        return Err(ScenarioError::DemandSignMismatch {
                            scenario: s.id.clone(),
                            node: node.clone(),
                            kind,
                            demand,
                        });
                    }
                    if demand > 0.0 {
                        emitted += demand;
                    } else {
                        capacity -= demand;
                    }
                }
                if emitted > capacity + 1e-9 {
                    return Err(ScenarioError::SinkCapacityShortfall {
                        scenario: s.id.clone(),
                        period,
                        emitters: emitted,
                        capacity,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roster() -> BTreeMap<String, NodeKind> {
        [
            ("e1".to_string(), NodeKind::Emitter),
            ("e2".to_string(), NodeKind::Emitter),
            ("k1".to_string(), NodeKind::Sink),
            ("t1".to_string(), NodeKind::Transport),
        ]
        .into_iter()
        .collect()
    }

    fn demands(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect()
    }

    fn one_scenario_set() -> ScenarioSet {
        ScenarioSet {
            initial: "S1".into(),
            scenarios: vec![Scenario {
                id: "S1".into(),
                demand_t0: demands(&[("e1", 10.0), ("k1", -10.0)]),
                demand_t1: demands(&[("e1", 10.0), ("k1", -10.0)]),
            }],
        }
    }

    #[test]
    fn minimal_set_validates() {
        one_scenario_set().validate(&roster()).unwrap();
    }

    #[test]
    fn sink_capacity_shortfall_detected() {
        // 37.2 Mt/a of emissions against 30 Mt/a of sink capacity.
        let set = ScenarioSet {
            initial: "S4".into(),
            scenarios: vec![Scenario {
                id: "S4".into(),
                demand_t0: demands(&[("e1", 37.2), ("k1", -30.0)]),
                demand_t1: demands(&[("e1", 37.2), ("k1", -30.0)]),
            }],
        };
        assert!(matches!(
            set.validate(&roster()),
            Err(ScenarioError::SinkCapacityShortfall { period: 0, .. })
        ));
    }

    #[test]
    fn unknown_node_detected() {
        let mut set = one_scenario_set();
        set.scenarios[0]
            .demand_t1
            .insert("ghost".into(), 1.0);
        assert!(matches!(
            set.validate(&roster()),
            Err(ScenarioError::UnknownNode { .. })
        ));
    }

    #[test]
    fn duplicate_scenario_detected() {
        let mut set = one_scenario_set();
        set.scenarios.push(set.scenarios[0].clone());
        assert!(matches!(
            set.validate(&roster()),
            Err(ScenarioError::DuplicateScenario(_))
        ));
    }

    #[test]
    fn transport_demand_rejected() {
        let mut set = one_scenario_set();
        set.scenarios[0].demand_t0.insert("t1".into(), 2.0);
        assert!(matches!(
            set.validate(&roster()),
            Err(ScenarioError::DemandSignMismatch { .. })
        ));
    }

    #[test]
    fn delta_empty_for_unchanged_initial() {
        let set = one_scenario_set();
        assert!(set.scenario_delta("S1").is_empty());
    }

    #[test]
    fn delta_reports_joining_nodes() {
        let mut set = one_scenario_set();
        set.scenarios.push(Scenario {
            id: "S2".into(),
            demand_t0: set.scenarios[0].demand_t0.clone(),
            demand_t1: demands(&[("e1", 10.0), ("e2", 7.2), ("k1", -17.2)]),
        });
        assert_eq!(set.scenario_delta("S2"), vec!["e2".to_string(), "k1".to_string()]);
    }

    #[test]
    fn delta_all_emitters_when_doubled() {
        let mut set = one_scenario_set();
        set.scenarios[0].demand_t1 = demands(&[("e1", 20.0), ("k1", -20.0)]);
        assert_eq!(
            set.scenario_delta("S1"),
            vec!["e1".to_string(), "k1".to_string()]
        );
    }

    #[test]
    fn horizon_validation() {
        let mut h = HorizonParams::default();
        h.validate().unwrap();
        assert!((h.proration() - 0.8).abs() < 1e-12);
        h.years_to_second_stage = 25;
        assert!(h.validate().is_err());
        h.years_to_second_stage = 5;
        h.pressure_uplift = 1.0;
        assert!(h.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let set = one_scenario_set();
        let text = toml::to_string(&set).unwrap();
        let back: ScenarioSet = toml::from_str(&text).unwrap();
        assert_eq!(set, back);
    }
}
