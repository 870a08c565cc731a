//! Network design models and the three planning objectives.
//!
//! The first stage picks one cost trend per arc and a flow within its window
//! so the initial scenario's demands route through the network. The second
//! stage is indexed by scenario: each arc either loops (keeps its line and
//! may add a parallel or new one, option 1) or takes a pressure increase
//! (total flow pinned to the built capacity times the uplift factor at a
//! fraction of the original capex, option 2). The couplings between total
//! flow and capacities are indicator constraints; [`CouplingMode::Literal`]
//! keeps the printed equalities (built arcs carry exactly their capacity in
//! every scenario), [`CouplingMode::Relaxed`] reads them as capacities.
//!
//! Objectives: perfect information (M1) minimizes both periods jointly for a
//! known scenario; successive information (M2) first minimizes period-0
//! capex alone and then optimizes the upgrades with the first stage frozen;
//! the regret model minimizes the worst-case gap to the per-scenario M1
//! optima.

use crate::economics::{CostBreakdown, HorizonFactors, OmSchedule};
use crate::graph::CandidateGraph;
use crate::milp::adapter::{
    SolveError, SolveOptions, SolveStatus, SolverAdapter, WarmStart,
};
use crate::milp::ir::{Model, ModelError, RowOp, VarId};
use crate::scenario::{HorizonParams, Scenario, ScenarioError, ScenarioSet};
use crate::trends::Trend;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// EUR per million EUR; model objectives are scaled to millions for
/// conditioning, reports stay in EUR.
const MIO: f64 = 1.0e6;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scenario {0} not part of the scenario set")]
    UnknownScenario(String),
    #[error("instance invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolveError),
    #[error("model infeasible{}", .scenario.as_ref().map(|s| format!(" for scenario {s}")).unwrap_or_default())]
    Infeasible { scenario: Option<String> },
    #[error("no network can serve scenario {scenario} by upgrading the frozen first stage")]
    RecourseInfeasible { scenario: String },
    #[error("solver hit its budget without finding any feasible plan")]
    NoIncumbent,
    #[error("perfect-information cost missing for scenario {0}")]
    MissingBest(String),
    #[error("warm-start plan incompatible: {0}")]
    IncompatiblePlan(String),
}

/// How the option couplings read the printed flow equalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Selected options pin the total flow to the coupled expression.
    #[default]
    Literal,
    /// Couplings act as capacities (`<=`).
    Relaxed,
}

/// Everything the optimization models need about one planning problem.
#[derive(Debug, Clone)]
pub struct PlanningInstance {
    pub graph: CandidateGraph,
    pub trends: Vec<Trend>,
    pub scenarios: ScenarioSet,
    pub horizon: HorizonParams,
    pub coupling: CouplingMode,
    pub om_schedule: OmSchedule,
}

impl PlanningInstance {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.trends.is_empty() {
            return Err(EngineError::Invalid("no cost trends".into()));
        }
        for t in &self.trends {
            if !(t.q_min >= 0.0 && t.q_min < t.q_max) {
                return Err(EngineError::Invalid(format!(
                    "trend window [{}, {}] invalid",
                    t.q_min, t.q_max
                )));
            }
        }
        self.horizon
            .validate()
            .map_err(EngineError::Scenario)?;
        self.scenarios.validate(&self.graph.roster())?;
        Ok(())
    }

    fn scenario(&self, id: &str) -> Result<&Scenario, EngineError> {
        self.scenarios
            .get(id)
            .ok_or_else(|| EngineError::UnknownScenario(id.to_string()))
    }

    fn factors(&self) -> HorizonFactors {
        HorizonFactors::new(&self.horizon, self.om_schedule)
    }

    /// Capex of one arc in EUR for a built trend and flow.
    fn arc_capex_eur(&self, arc: usize, trend: usize, flow: f64) -> f64 {
        let t = &self.trends[trend];
        (t.slope * flow + t.intercept) * self.graph.arcs[arc].length_km
    }
}

/// Variable ids of one scenario block.
struct ScenarioVars {
    id: String,
    use_loop: Vec<VarId>,
    use_boost: Vec<VarId>,
    build2: Vec<Vec<VarId>>,
    flow2: Vec<Vec<VarId>>,
    total_flow: Vec<VarId>,
    restructure: Vec<VarId>,
}

/// A network model under construction: first stage plus scenario blocks.
pub struct NetworkModel {
    pub model: Model,
    build: Vec<Vec<VarId>>,
    flow: Vec<Vec<VarId>>,
    blocks: Vec<ScenarioVars>,
    regret_var: Option<VarId>,
    n_arcs: usize,
    n_trends: usize,
}

impl NetworkModel {
    /// Stage-one variables and constraints: trend windows, one trend per
    /// arc, and nodal flow conservation for the initial scenario's demands
    /// (`outflow - inflow >= demand`).
    pub fn first_stage(instance: &PlanningInstance) -> Result<Self, EngineError> {
        instance.validate()?;
        let graph = &instance.graph;
        let trends = &instance.trends;
        let mut model = Model::new("network");
        let mut build = Vec::with_capacity(graph.arcs.len());
        let mut flow = Vec::with_capacity(graph.arcs.len());
        for (a, _arc) in graph.arcs.iter().enumerate() {
            let mut b_row = Vec::new();
            let mut p_row = Vec::new();
            for (c, t) in trends.iter().enumerate() {
                b_row.push(model.add_binary(format!("b_a{a}_c{c}"), 0.0));
                p_row.push(model.add_continuous(format!("p_a{a}_c{c}"), 0.0, t.q_max, 0.0));
            }
            build.push(b_row);
            flow.push(p_row);
        }
        for a in 0..graph.arcs.len() {
            for (c, t) in trends.iter().enumerate() {
                model.add_row(
                    format!("window_min_a{a}_c{c}"),
                    vec![(flow[a][c], 1.0), (build[a][c], -t.q_min)],
                    RowOp::Ge,
                    0.0,
                );
                model.add_row(
                    format!("window_max_a{a}_c{c}"),
                    vec![(flow[a][c], 1.0), (build[a][c], -t.q_max)],
                    RowOp::Le,
                    0.0,
                );
            }
            model.add_row(
                format!("one_trend_a{a}"),
                build[a].iter().map(|&b| (b, 1.0)).collect(),
                RowOp::Le,
                1.0,
            );
        }
        let initial = instance.scenarios.initial_scenario();
        for (j, node) in graph.nodes.iter().enumerate() {
            let mut coeffs: Vec<(VarId, f64)> = Vec::new();
            for (a, arc) in graph.arcs.iter().enumerate() {
                let sign = if arc.from == j {
                    1.0
                } else if arc.to == j {
                    -1.0
                } else {
                    continue;
                };
                for c in 0..trends.len() {
                    coeffs.push((flow[a][c], sign));
                }
            }
            model.add_row(
                format!("conserve_t0_n{j}"),
                coeffs,
                RowOp::Ge,
                node.demand_t0(initial),
            );
        }
        Ok(Self {
            model,
            build,
            flow,
            blocks: Vec::new(),
            regret_var: None,
            n_arcs: graph.arcs.len(),
            n_trends: trends.len(),
        })
    }

    /// Adds one scenario's second-stage block: option choice, period-1
    /// conservation, fresh trend-bounded builds and the option couplings as
    /// indicator constraints. Returns the block index.
    pub fn add_second_stage(
        &mut self,
        instance: &PlanningInstance,
        scenario_id: &str,
    ) -> Result<usize, EngineError> {
        let scenario = instance.scenario(scenario_id)?;
        let graph = &instance.graph;
        let trends = &instance.trends;
        let h = &instance.horizon;
        let s = self.blocks.len();
        let max_q = trends.iter().map(|t| t.q_max).fold(0.0, f64::max);
        let flow_cap = max_q * (2.0f64).max(h.pressure_uplift);
        let model = &mut self.model;

        let mut vars = ScenarioVars {
            id: scenario_id.to_string(),
            use_loop: Vec::new(),
            use_boost: Vec::new(),
            build2: Vec::new(),
            flow2: Vec::new(),
            total_flow: Vec::new(),
            restructure: Vec::new(),
        };
        for (a, arc) in graph.arcs.iter().enumerate() {
            vars.use_loop
                .push(model.add_binary(format!("u1_a{a}_s{s}"), 0.0));
            vars.use_boost
                .push(model.add_binary(format!("u2_a{a}_s{s}"), 0.0));
            let mut b_row = Vec::new();
            let mut p_row = Vec::new();
            for (c, t) in trends.iter().enumerate() {
                b_row.push(model.add_binary(format!("bs_a{a}_c{c}_s{s}"), 0.0));
                p_row.push(model.add_continuous(
                    format!("ps_a{a}_c{c}_s{s}"),
                    0.0,
                    t.q_max,
                    0.0,
                ));
            }
            vars.build2.push(b_row);
            vars.flow2.push(p_row);
            vars.total_flow
                .push(model.add_continuous(format!("f_a{a}_s{s}"), 0.0, flow_cap, 0.0));
            let r_cap = h.pressure_cost_fraction
                * trends
                    .iter()
                    .map(|t| t.slope * t.q_max + t.intercept)
                    .fold(0.0, f64::max)
                * arc.length_km
                / MIO;
            vars.restructure
                .push(model.add_continuous(format!("r_a{a}_s{s}"), 0.0, r_cap, 0.0));
        }

        for a in 0..graph.arcs.len() {
            model.add_row(
                format!("one_option_a{a}_s{s}"),
                vec![(vars.use_loop[a], 1.0), (vars.use_boost[a], 1.0)],
                RowOp::Eq,
                1.0,
            );
            for (c, t) in trends.iter().enumerate() {
                model.add_row(
                    format!("window2_min_a{a}_c{c}_s{s}"),
                    vec![(vars.flow2[a][c], 1.0), (vars.build2[a][c], -t.q_min)],
                    RowOp::Ge,
                    0.0,
                );
                model.add_row(
                    format!("window2_max_a{a}_c{c}_s{s}"),
                    vec![(vars.flow2[a][c], 1.0), (vars.build2[a][c], -t.q_max)],
                    RowOp::Le,
                    0.0,
                );
            }
            model.add_row(
                format!("one_trend2_a{a}_s{s}"),
                vars.build2[a].iter().map(|&b| (b, 1.0)).collect(),
                RowOp::Le,
                1.0,
            );

            // Option couplings. Literal mode pins the total flow, relaxed
            // mode caps it.
            let coupling_op = match instance.coupling {
                CouplingMode::Literal => RowOp::Eq,
                CouplingMode::Relaxed => RowOp::Le,
            };
            let mut loop_coeffs = vec![(vars.total_flow[a], 1.0)];
            for c in 0..trends.len() {
                loop_coeffs.push((self.flow[a][c], -1.0));
                loop_coeffs.push((vars.flow2[a][c], -1.0));
            }
            model.add_indicator(
                format!("loop_flow_a{a}_s{s}"),
                vars.use_loop[a],
                loop_coeffs,
                coupling_op,
                0.0,
            )?;
            let mut boost_coeffs = vec![(vars.total_flow[a], 1.0)];
            for c in 0..trends.len() {
                boost_coeffs.push((self.flow[a][c], -h.pressure_uplift));
            }
            model.add_indicator(
                format!("boost_flow_a{a}_s{s}"),
                vars.use_boost[a],
                boost_coeffs,
                coupling_op,
                0.0,
            )?;
            // Restructuring cost: r = pressure_cost_fraction * first-stage
            // capex of the arc (in millions).
            let length = graph.arcs[a].length_km;
            let mut cost_coeffs = vec![(vars.restructure[a], 1.0)];
            for (c, t) in trends.iter().enumerate() {
                let scale = h.pressure_cost_fraction * length / MIO;
                cost_coeffs.push((self.flow[a][c], -scale * t.slope));
                cost_coeffs.push((self.build[a][c], -scale * t.intercept));
            }
            model.add_indicator(
                format!("boost_cost_a{a}_s{s}"),
                vars.use_boost[a],
                cost_coeffs,
                RowOp::Eq,
                0.0,
            )?;
        }

        for (j, node) in graph.nodes.iter().enumerate() {
            let mut coeffs: Vec<(VarId, f64)> = Vec::new();
            for (a, arc) in graph.arcs.iter().enumerate() {
                if arc.from == j {
                    coeffs.push((vars.total_flow[a], 1.0));
                } else if arc.to == j {
                    coeffs.push((vars.total_flow[a], -1.0));
                }
            }
            model.add_row(
                format!("conserve_t1_n{j}_s{s}"),
                coeffs,
                RowOp::Ge,
                node.demand_t1(scenario),
            );
        }
        self.blocks.push(vars);
        Ok(s)
    }

    /// Period-0 capex terms in millions: `(slope p + intercept b) l / MIO`.
    fn capex_terms_t0(&self, instance: &PlanningInstance) -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for (a, arc) in instance.graph.arcs.iter().enumerate() {
            for (c, t) in instance.trends.iter().enumerate() {
                terms.push((self.flow[a][c], t.slope * arc.length_km / MIO));
                terms.push((self.build[a][c], t.intercept * arc.length_km / MIO));
            }
        }
        terms
    }

    fn capex_terms_t1(&self, instance: &PlanningInstance, block: usize) -> Vec<(VarId, f64)> {
        let vars = &self.blocks[block];
        let mut terms = Vec::new();
        for (a, arc) in instance.graph.arcs.iter().enumerate() {
            for (c, t) in instance.trends.iter().enumerate() {
                terms.push((vars.flow2[a][c], t.slope * arc.length_km / MIO));
                terms.push((vars.build2[a][c], t.intercept * arc.length_km / MIO));
            }
        }
        terms
    }

    fn restructure_terms(&self, block: usize) -> Vec<(VarId, f64)> {
        self.blocks[block]
            .restructure
            .iter()
            .map(|&r| (r, 1.0))
            .collect()
    }

    fn clear_objective(&mut self) {
        for v in &mut self.model.vars {
            v.obj = 0.0;
        }
        self.model.obj_offset = 0.0;
    }

    fn add_objective_terms(&mut self, terms: &[(VarId, f64)], weight: f64) {
        for (var, coeff) in terms {
            self.model.vars[var.0].obj += weight * coeff;
        }
    }

    /// Full two-period cost of one scenario block, in millions:
    /// `(1 + om0 + om1) I0 + (proration + om1) I1 + (1 + om1) R`.
    fn set_cost_objective(&mut self, instance: &PlanningInstance, block: usize) {
        let f = instance.factors();
        self.clear_objective();
        let t0 = self.capex_terms_t0(instance);
        self.add_objective_terms(&t0, 1.0 + f.om0 + f.om1);
        let t1 = self.capex_terms_t1(instance, block);
        self.add_objective_terms(&t1, f.proration + f.om1);
        let r = self.restructure_terms(block);
        self.add_objective_terms(&r, 1.0 + f.om1);
    }

    /// Period-0 investment alone (the first step of the successive model).
    fn set_capex_objective(&mut self, instance: &PlanningInstance) {
        self.clear_objective();
        let t0 = self.capex_terms_t0(instance);
        self.add_objective_terms(&t0, 1.0);
    }

    /// Regret epigraph: minimize x subject to
    /// `cost_s - best_s <= x` for every scenario block, `x >= 0`.
    fn set_regret_objective(
        &mut self,
        instance: &PlanningInstance,
        best_mio: &BTreeMap<String, f64>,
    ) -> Result<(), EngineError> {
        let f = instance.factors();
        self.clear_objective();
        let x = self
            .model
            .add_continuous("regret", 0.0, f64::INFINITY, 1.0);
        self.regret_var = Some(x);
        for block in 0..self.blocks.len() {
            let id = self.blocks[block].id.clone();
            let best = *best_mio
                .get(&id)
                .ok_or_else(|| EngineError::MissingBest(id.clone()))?;
            let mut coeffs: Vec<(VarId, f64)> = Vec::new();
            for (v, c) in self.capex_terms_t0(instance) {
                coeffs.push((v, c * (1.0 + f.om0 + f.om1)));
            }
            for (v, c) in self.capex_terms_t1(instance, block) {
                coeffs.push((v, c * (f.proration + f.om1)));
            }
            for (v, c) in self.restructure_terms(block) {
                coeffs.push((v, c * (1.0 + f.om1)));
            }
            coeffs.push((x, -1.0));
            self.model
                .add_row(format!("regret_s{block}"), coeffs, RowOp::Le, best);
        }
        Ok(())
    }

    /// Maps a plan's decisions onto this model's binaries as a warm start.
    /// First-stage builds always transfer; scenario blocks transfer where
    /// both sides know the scenario.
    pub fn warm_start(&self, plan: &PlanSolution) -> Result<WarmStart, EngineError> {
        for (&arc, build) in &plan.first_stage.builds {
            if arc >= self.n_arcs || build.trend >= self.n_trends {
                return Err(EngineError::IncompatiblePlan(format!(
                    "plan references arc {arc} trend {} outside this model",
                    build.trend
                )));
            }
        }
        let mut hints: WarmStart = Vec::new();
        for a in 0..self.n_arcs {
            let built = plan.first_stage.builds.get(&a);
            for c in 0..self.n_trends {
                let on = built.map_or(false, |b| b.trend == c);
                hints.push((self.build[a][c], if on { 1.0 } else { 0.0 }));
            }
        }
        for block in &self.blocks {
            let Some(outcome) = plan.scenarios.get(&block.id) else {
                continue;
            };
            for a in 0..self.n_arcs {
                let upgrade = outcome.upgrades.get(&a);
                let boost = upgrade.map_or(false, |u| u.option == UpgradeOption::PressureIncrease);
                hints.push((block.use_boost[a], if boost { 1.0 } else { 0.0 }));
                hints.push((block.use_loop[a], if boost { 0.0 } else { 1.0 }));
                for c in 0..self.n_trends {
                    let on = upgrade
                        .and_then(|u| u.new_build.as_ref())
                        .map_or(false, |b| b.trend == c);
                    hints.push((block.build2[a][c], if on { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(hints)
    }
}

/// Which model produced a solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model", content = "scenario")]
pub enum ModelKind {
    PerfectInformation(String),
    SuccessiveInformation(String),
    MinMaxRegret,
}

/// A built trend and its flow on one arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcBuild {
    pub trend: usize,
    pub flow_mta: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FirstStageDecision {
    /// Built arcs by arc index.
    pub builds: BTreeMap<usize, ArcBuild>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpgradeOption {
    /// Keep the line and optionally add a parallel or new one.
    LoopOrNew,
    /// Boost an existing line's throughput by the uplift factor.
    PressureIncrease,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Upgrade {
    pub option: UpgradeOption,
    pub new_build: Option<ArcBuild>,
    /// Total period-1 flow on the arc in Mt/a.
    pub flow_mta: f64,
    pub restructuring_eur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    /// Arcs with a period-1 action or flow.
    pub upgrades: BTreeMap<usize, Upgrade>,
    pub breakdown: CostBreakdown,
}

/// A solved plan: first-stage builds, per-scenario recourse and costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    pub kind: ModelKind,
    pub status: SolveStatus,
    pub gap: Option<f64>,
    pub solver: String,
    /// Objective in EUR: the scenario total for M1/M2, the worst-case
    /// regret for the regret model.
    pub objective_eur: f64,
    /// System regret `x` in EUR, for the regret model.
    pub regret_eur: Option<f64>,
    pub first_stage: FirstStageDecision,
    pub scenarios: BTreeMap<String, ScenarioOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl PlanSolution {
    /// An empty plan; warm starting with it is a no-op.
    pub fn empty() -> Self {
        Self {
            kind: ModelKind::MinMaxRegret,
            status: SolveStatus::Optimal,
            gap: None,
            solver: String::new(),
            objective_eur: 0.0,
            regret_eur: None,
            first_stage: FirstStageDecision::default(),
            scenarios: BTreeMap::new(),
            config_hash: None,
        }
    }
}

/// Perfect-information optima per scenario, with the plans that achieved
/// them (reused as warm starts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestCosts {
    pub totals_eur: BTreeMap<String, f64>,
    pub plans: BTreeMap<String, PlanSolution>,
}

/// Orchestrates model building and solving against one backend.
pub struct Planner<'a, S: SolverAdapter + Sync> {
    pub instance: &'a PlanningInstance,
    pub solver: S,
    pub options: SolveOptions,
}

impl<'a, S: SolverAdapter + Sync> Planner<'a, S> {
    pub fn new(instance: &'a PlanningInstance, solver: S, options: SolveOptions) -> Self {
        Self {
            instance,
            solver,
            options,
        }
    }

    fn run(
        &self,
        net: &NetworkModel,
        warm: Option<&WarmStart>,
        scenario: Option<&str>,
    ) -> Result<crate::milp::adapter::SolveOutcome, EngineError> {
        let outcome = self.solver.solve(&net.model, &self.options, warm)?;
        match outcome.status {
            SolveStatus::Infeasible => Err(EngineError::Infeasible {
                scenario: scenario.map(str::to_string),
            }),
            SolveStatus::TimeLimit if outcome.objective.is_none() => {
                Err(EngineError::NoIncumbent)
            }
            _ => Ok(outcome),
        }
    }

    /// Perfect-information model for one realized scenario.
    pub fn solve_m1(&self, scenario_id: &str) -> Result<PlanSolution, EngineError> {
        self.solve_m1_warm(scenario_id, None)
    }

    pub fn solve_m1_warm(
        &self,
        scenario_id: &str,
        warm_plan: Option<&PlanSolution>,
    ) -> Result<PlanSolution, EngineError> {
        let mut net = NetworkModel::first_stage(self.instance)?;
        let block = net.add_second_stage(self.instance, scenario_id)?;
        net.set_cost_objective(self.instance, block);
        let warm = self.hints(&net, warm_plan)?;
        let outcome = self.run(&net, warm.as_ref(), Some(scenario_id))?;
        let mut plan = extract_plan(
            self.instance,
            &net,
            &outcome,
            ModelKind::PerfectInformation(scenario_id.to_string()),
            self.solver.name(),
        );
        // By definition the M1 optimum is the best known cost for its own
        // scenario.
        if let Some(outcome) = plan.scenarios.get_mut(scenario_id) {
            outcome.breakdown = outcome.breakdown.with_best(plan.objective_eur);
        }
        Ok(plan)
    }

    /// Successive-information model: capex-minimal stage one for the initial
    /// scenario, then optimal upgrades for the realized scenario with the
    /// first stage frozen.
    pub fn solve_m2(&self, scenario_id: &str) -> Result<PlanSolution, EngineError> {
        self.instance.scenario(scenario_id)?;
        // Step 1: min I0 subject to the stage-one constraints only.
        let mut net = NetworkModel::first_stage(self.instance)?;
        net.set_capex_objective(self.instance);
        let outcome = self.run(&net, None, None)?;
        let first_stage = extract_first_stage(self.instance, &net, &outcome.values);

        // Step 2: freeze the first stage as parameters.
        let (model, vars) = recourse_model(self.instance, scenario_id, &first_stage)?;
        let outcome2 = self
            .solver
            .solve(&model, &self.options, None)
            .map_err(EngineError::from)?;
        if outcome2.status == SolveStatus::Infeasible {
            return Err(EngineError::RecourseInfeasible {
                scenario: scenario_id.to_string(),
            });
        }
        if outcome2.objective.is_none() {
            return Err(EngineError::NoIncumbent);
        }
        let upgrades = extract_upgrades_standalone(
            self.instance,
            &vars,
            &outcome2.values,
            &first_stage,
        );
        let i0 = first_stage_capex_eur(self.instance, &first_stage);
        let (i1, r) = period1_costs_eur(self.instance, &upgrades);
        let breakdown = CostBreakdown::from_investments(
            i0,
            i1,
            r,
            &self.instance.horizon,
            self.instance.om_schedule,
        );
        let mut scenarios = BTreeMap::new();
        scenarios.insert(
            scenario_id.to_string(),
            ScenarioOutcome {
                upgrades,
                breakdown,
            },
        );
        Ok(PlanSolution {
            kind: ModelKind::SuccessiveInformation(scenario_id.to_string()),
            status: outcome2.status,
            gap: outcome2.gap,
            solver: self.solver.name().to_string(),
            objective_eur: breakdown.total,
            regret_eur: None,
            first_stage,
            scenarios,
            config_hash: None,
        })
    }

    /// Perfect-information optima for every scenario; these are the regret
    /// baselines. Scenario solves are independent and run in parallel.
    pub fn best_costs(&self) -> Result<BestCosts, EngineError> {
        let ids: Vec<String> = self.instance.scenarios.ids().map(str::to_string).collect();
        let solved: Vec<(String, Result<PlanSolution, EngineError>)> = ids
            .par_iter()
            .map(|id| (id.clone(), self.solve_m1(id)))
            .collect();
        let mut totals = BTreeMap::new();
        let mut plans = BTreeMap::new();
        for (id, plan) in solved {
            let plan = plan?;
            totals.insert(id.clone(), plan.objective_eur);
            plans.insert(id, plan);
        }
        Ok(BestCosts {
            totals_eur: totals,
            plans,
        })
    }

    /// Two-stage min-max regret over all scenarios. The perfect-information
    /// plan of the scenario with the highest baseline seeds the search.
    pub fn solve_min_max_regret(&self, best: &BestCosts) -> Result<PlanSolution, EngineError> {
        let mut net = NetworkModel::first_stage(self.instance)?;
        let ids: Vec<String> = self.instance.scenarios.ids().map(str::to_string).collect();
        for id in &ids {
            net.add_second_stage(self.instance, id)?;
        }
        let best_mio: BTreeMap<String, f64> = ids
            .iter()
            .map(|id| {
                best.totals_eur
                    .get(id)
                    .map(|v| (id.clone(), v / MIO))
                    .ok_or_else(|| EngineError::MissingBest(id.clone()))
            })
            .collect::<Result<_, _>>()?;
        net.set_regret_objective(self.instance, &best_mio)?;
        let warm_plan = best
            .totals_eur
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .and_then(|(id, _)| best.plans.get(id));
        let warm = self.hints(&net, warm_plan)?;
        let outcome = self.run(&net, warm.as_ref(), None)?;
        let mut plan = extract_plan(
            self.instance,
            &net,
            &outcome,
            ModelKind::MinMaxRegret,
            self.solver.name(),
        );
        let x_eur = outcome.objective.expect("run() guarantees an incumbent") * MIO;
        plan.objective_eur = x_eur;
        plan.regret_eur = Some(x_eur);
        for id in &ids {
            let best_eur = best.totals_eur[id];
            if let Some(outcome) = plan.scenarios.get_mut(id) {
                outcome.breakdown = outcome.breakdown.with_best(best_eur);
            }
        }
        Ok(plan)
    }

    /// Translates a plan into solver hints for the given model, when the
    /// backend supports warm starts. An empty plan is a no-op.
    fn hints(
        &self,
        net: &NetworkModel,
        plan: Option<&PlanSolution>,
    ) -> Result<Option<WarmStart>, EngineError> {
        let Some(plan) = plan else {
            return Ok(None);
        };
        if plan.first_stage.builds.is_empty() && plan.scenarios.is_empty() {
            return Ok(None);
        }
        if !self.solver.capabilities().warm_start {
            return Ok(None);
        }
        Ok(Some(net.warm_start(plan)?))
    }
}

/// First-stage builds from solved model values.
fn extract_first_stage(
    instance: &PlanningInstance,
    net: &NetworkModel,
    values: &[f64],
) -> FirstStageDecision {
    let mut builds = BTreeMap::new();
    for a in 0..net.n_arcs {
        for c in 0..net.n_trends {
            if values[net.build[a][c].0] > 0.5 {
                let t = &instance.trends[c];
                let flow = values[net.flow[a][c].0].clamp(t.q_min, t.q_max);
                builds.insert(a, ArcBuild { trend: c, flow_mta: flow });
            }
        }
    }
    FirstStageDecision { builds }
}

fn extract_block_upgrades(
    instance: &PlanningInstance,
    net: &NetworkModel,
    block: usize,
    values: &[f64],
    first_stage: &FirstStageDecision,
) -> BTreeMap<usize, Upgrade> {
    let vars = &net.blocks[block];
    let mut upgrades = BTreeMap::new();
    for a in 0..net.n_arcs {
        let boost = values[vars.use_boost[a].0] > 0.5;
        let mut new_build = None;
        for c in 0..net.n_trends {
            if values[vars.build2[a][c].0] > 0.5 {
                let t = &instance.trends[c];
                new_build = Some(ArcBuild {
                    trend: c,
                    flow_mta: values[vars.flow2[a][c].0].clamp(t.q_min, t.q_max),
                });
            }
        }
        let stage1 = first_stage.builds.get(&a);
        let restructuring_eur = if boost {
            stage1.map_or(0.0, |b| {
                instance.horizon.pressure_cost_fraction
                    * instance.arc_capex_eur(a, b.trend, b.flow_mta)
            })
        } else {
            0.0
        };
        let flow = values[vars.total_flow[a].0].max(0.0);
        let interesting = new_build.is_some()
            || (boost && stage1.is_some())
            || flow > 1e-9;
        if interesting {
            upgrades.insert(
                a,
                Upgrade {
                    option: if boost {
                        UpgradeOption::PressureIncrease
                    } else {
                        UpgradeOption::LoopOrNew
                    },
                    new_build,
                    flow_mta: flow,
                    restructuring_eur,
                },
            );
        }
    }
    upgrades
}

fn first_stage_capex_eur(instance: &PlanningInstance, fs: &FirstStageDecision) -> f64 {
    fs.builds
        .iter()
        .map(|(&a, b)| instance.arc_capex_eur(a, b.trend, b.flow_mta))
        .sum()
}

/// Period-1 investment and restructuring in EUR from the upgrade decisions.
fn period1_costs_eur(
    instance: &PlanningInstance,
    upgrades: &BTreeMap<usize, Upgrade>,
) -> (f64, f64) {
    let mut i1 = 0.0;
    let mut r = 0.0;
    for (&a, upgrade) in upgrades {
        if let Some(b) = &upgrade.new_build {
            i1 += instance.arc_capex_eur(a, b.trend, b.flow_mta);
        }
        r += upgrade.restructuring_eur;
    }
    (i1, r)
}

fn extract_plan(
    instance: &PlanningInstance,
    net: &NetworkModel,
    outcome: &crate::milp::adapter::SolveOutcome,
    kind: ModelKind,
    solver: &str,
) -> PlanSolution {
    let values = &outcome.values;
    let first_stage = extract_first_stage(instance, net, values);
    let i0 = first_stage_capex_eur(instance, &first_stage);
    let mut scenarios = BTreeMap::new();
    for block in 0..net.blocks.len() {
        let upgrades = extract_block_upgrades(instance, net, block, values, &first_stage);
        let (i1, r) = period1_costs_eur(instance, &upgrades);
        let breakdown = CostBreakdown::from_investments(
            i0,
            i1,
            r,
            &instance.horizon,
            instance.om_schedule,
        );
        scenarios.insert(
            net.blocks[block].id.clone(),
            ScenarioOutcome {
                upgrades,
                breakdown,
            },
        );
    }
    let objective_eur = match &kind {
        ModelKind::MinMaxRegret => outcome.objective.unwrap_or(0.0) * MIO,
        _ => scenarios
            .values()
            .next()
            .map(|o| o.breakdown.total)
            .unwrap_or(0.0),
    };
    PlanSolution {
        kind,
        status: outcome.status,
        gap: outcome.gap,
        solver: solver.to_string(),
        objective_eur,
        regret_eur: None,
        first_stage,
        scenarios,
        config_hash: None,
    }
}

/// Variables of the standalone recourse model used by M2 step 2.
struct RecourseVars {
    use_boost: Vec<VarId>,
    build2: Vec<Vec<VarId>>,
    flow2: Vec<Vec<VarId>>,
    total_flow: Vec<VarId>,
}

/// Second stage with first-stage decisions as constants. The boost coupling
/// and restructuring cost have constant right-hand sides here.
fn recourse_model(
    instance: &PlanningInstance,
    scenario_id: &str,
    first_stage: &FirstStageDecision,
) -> Result<(Model, RecourseVars), EngineError> {
    let scenario = instance.scenario(scenario_id)?;
    let graph = &instance.graph;
    let trends = &instance.trends;
    let h = &instance.horizon;
    let f = instance.factors();
    let mut model = Model::new(format!("recourse_{scenario_id}"));
    let max_q = trends.iter().map(|t| t.q_max).fold(0.0, f64::max);
    let flow_cap = max_q * (2.0f64).max(h.pressure_uplift);

    let q: Vec<f64> = (0..graph.arcs.len())
        .map(|a| first_stage.builds.get(&a).map_or(0.0, |b| b.flow_mta))
        .collect();
    let i0_arc: Vec<f64> = (0..graph.arcs.len())
        .map(|a| {
            first_stage
                .builds
                .get(&a)
                .map_or(0.0, |b| instance.arc_capex_eur(a, b.trend, b.flow_mta))
        })
        .collect();
    let i0_total: f64 = i0_arc.iter().sum();

    let mut vars = RecourseVars {
        use_boost: Vec::new(),
        build2: Vec::new(),
        flow2: Vec::new(),
        total_flow: Vec::new(),
    };
    for (a, _) in graph.arcs.iter().enumerate() {
        // Objective weights follow the period-1 part of the total:
        // (proration + om1) I1 + (1 + om1) R, with om1 * I0 as a constant.
        let use_loop = model.add_binary(format!("u1_a{a}"), 0.0);
        let boost_cost_mio = h.pressure_cost_fraction * i0_arc[a] / MIO;
        let use_boost = model.add_binary(
            format!("u2_a{a}"),
            (1.0 + f.om1) * boost_cost_mio,
        );
        model.add_row(
            format!("one_option_a{a}"),
            vec![(use_loop, 1.0), (use_boost, 1.0)],
            RowOp::Eq,
            1.0,
        );
        let mut b_row = Vec::new();
        let mut p_row = Vec::new();
        for (c, t) in trends.iter().enumerate() {
            let weight = f.proration + f.om1;
            let b = model.add_binary(
                format!("bs_a{a}_c{c}"),
                weight * t.intercept * graph.arcs[a].length_km / MIO,
            );
            let p = model.add_continuous(
                format!("ps_a{a}_c{c}"),
                0.0,
                t.q_max,
                weight * t.slope * graph.arcs[a].length_km / MIO,
            );
            model.add_row(
                format!("window2_min_a{a}_c{c}"),
                vec![(p, 1.0), (b, -t.q_min)],
                RowOp::Ge,
                0.0,
            );
            model.add_row(
                format!("window2_max_a{a}_c{c}"),
                vec![(p, 1.0), (b, -t.q_max)],
                RowOp::Le,
                0.0,
            );
            b_row.push(b);
            p_row.push(p);
        }
        model.add_row(
            format!("one_trend2_a{a}"),
            b_row.iter().map(|&b| (b, 1.0)).collect(),
            RowOp::Le,
            1.0,
        );
        let total_flow = model.add_continuous(format!("f_a{a}"), 0.0, flow_cap, 0.0);

        let coupling_op = match instance.coupling {
            CouplingMode::Literal => RowOp::Eq,
            CouplingMode::Relaxed => RowOp::Le,
        };
        let mut loop_coeffs = vec![(total_flow, 1.0)];
        for &p in &p_row {
            loop_coeffs.push((p, -1.0));
        }
        model.add_indicator(
            format!("loop_flow_a{a}"),
            use_loop,
            loop_coeffs,
            coupling_op,
            q[a],
        )?;
        model.add_indicator(
            format!("boost_flow_a{a}"),
            use_boost,
            vec![(total_flow, 1.0)],
            coupling_op,
            h.pressure_uplift * q[a],
        )?;
        vars.use_boost.push(use_boost);
        vars.build2.push(b_row);
        vars.flow2.push(p_row);
        vars.total_flow.push(total_flow);
    }
    for (j, node) in graph.nodes.iter().enumerate() {
        let mut coeffs: Vec<(VarId, f64)> = Vec::new();
        for (a, arc) in graph.arcs.iter().enumerate() {
            if arc.from == j {
                coeffs.push((vars.total_flow[a], 1.0));
            } else if arc.to == j {
                coeffs.push((vars.total_flow[a], -1.0));
            }
        }
        model.add_row(
            format!("conserve_t1_n{j}"),
            coeffs,
            RowOp::Ge,
            node.demand_t1(scenario),
        );
    }
    // Constant part of z_t1: O&M on the frozen period-0 investment.
    model.obj_offset = f.om1 * i0_total / MIO;
    Ok((model, vars))
}

fn extract_upgrades_standalone(
    instance: &PlanningInstance,
    vars: &RecourseVars,
    values: &[f64],
    first_stage: &FirstStageDecision,
) -> BTreeMap<usize, Upgrade> {
    let mut upgrades = BTreeMap::new();
    for a in 0..vars.total_flow.len() {
        let boost = values[vars.use_boost[a].0] > 0.5;
        let mut new_build = None;
        for (c, t) in instance.trends.iter().enumerate() {
            if values[vars.build2[a][c].0] > 0.5 {
                new_build = Some(ArcBuild {
                    trend: c,
                    flow_mta: values[vars.flow2[a][c].0].clamp(t.q_min, t.q_max),
                });
            }
        }
        let stage1 = first_stage.builds.get(&a);
        let restructuring_eur = if boost {
            stage1.map_or(0.0, |b| {
                instance.horizon.pressure_cost_fraction
                    * instance.arc_capex_eur(a, b.trend, b.flow_mta)
            })
        } else {
            0.0
        };
        let flow = values[vars.total_flow[a].0].max(0.0);
        if new_build.is_some() || (boost && stage1.is_some()) || flow > 1e-9 {
            upgrades.insert(
                a,
                Upgrade {
                    option: if boost {
                        UpgradeOption::PressureIncrease
                    } else {
                        UpgradeOption::LoopOrNew
                    },
                    new_build,
                    flow_mta: flow,
                    restructuring_eur,
                },
            );
        }
    }
    upgrades
}
