//! Shared test support: an enumeration oracle for the optimization models
//! and a deterministic toy-instance generator.
//!
//! The oracle is independent of the solver under test: it enumerates every
//! first-stage build/trend combination and every per-arc recourse mode, and
//! evaluates the remaining continuous decisions with microlp (a different
//! LP implementation than the engine's simplex). Costs follow the same
//! aggregation as the engine: `(1 + om0 + om1) I0 + (proration + om1) I1 +
//! (1 + om1) R`.

#![allow(dead_code)]

use co2net::economics::HorizonFactors;
use co2net::engine::{CouplingMode, PlanningInstance};
use co2net::graph::{CandidateGraph, NodeKind};
use co2net::hydraulics::{CostParams, HydraulicParams};
use co2net::scenario::{HorizonParams, Scenario, ScenarioSet};
use co2net::trends::fit_trends;
use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const MIO: f64 = 1.0e6;

pub fn assert_close_rel(a: f64, b: f64, tol: f64, context: &str) {
    let scale = a.abs().max(b.abs()).max(1.0);
    assert!(
        (a - b).abs() <= tol * scale,
        "{context}: {a} vs {b} (rel {})",
        (a - b).abs() / scale
    );
}

/// Recourse mode of one arc in one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArcMode {
    /// Unbuilt arc left unused.
    Off,
    /// Unbuilt arc gets a new line with this trend.
    New(usize),
    /// Built arc kept as is.
    Keep,
    /// Built arc plus a parallel line with this trend.
    Loop(usize),
    /// Built arc boosted by the pressure uplift.
    Boost,
}

fn modes_for(built: Option<usize>, n_trends: usize) -> Vec<ArcMode> {
    match built {
        None => std::iter::once(ArcMode::Off)
            .chain((0..n_trends).map(ArcMode::New))
            .collect(),
        Some(_) => std::iter::once(ArcMode::Keep)
            .chain(std::iter::once(ArcMode::Boost))
            .chain((0..n_trends).map(ArcMode::Loop))
            .collect(),
    }
}

struct Costing {
    alpha0: f64,
    beta: f64,
    gamma: f64,
}

impl Costing {
    fn of(instance: &PlanningInstance) -> Self {
        let f = HorizonFactors::new(&instance.horizon, instance.om_schedule);
        Self {
            alpha0: 1.0 + f.om0 + f.om1,
            beta: f.proration + f.om1,
            gamma: 1.0 + f.om1,
        }
    }
}

fn push_coeff(row: &mut Vec<(Variable, f64)>, var: Variable, coeff: f64) {
    if let Some(entry) = row.iter_mut().find(|(v, _)| *v == var) {
        entry.1 += coeff;
    } else {
        row.push((var, coeff));
    }
}

/// Weighted fixed charges of a mode combo in EUR (everything that no LP
/// variable can change).
fn combo_const_eur(
    instance: &PlanningInstance,
    costing: &Costing,
    builds: &[Option<usize>],
    modes: &[ArcMode],
) -> f64 {
    let mut total = 0.0;
    for (a, mode) in modes.iter().enumerate() {
        let length = instance.graph.arcs[a].length_km;
        match mode {
            ArcMode::New(c) | ArcMode::Loop(c) => {
                total += costing.beta * instance.trends[*c].intercept * length;
            }
            ArcMode::Boost => {
                if let Some(c) = builds[a] {
                    total += costing.gamma
                        * instance.horizon.pressure_cost_fraction
                        * instance.trends[c].intercept
                        * length;
                }
            }
            ArcMode::Off | ArcMode::Keep => {}
        }
    }
    total
}

/// Weighted stage-one fixed charges in EUR.
fn build_const_eur(
    instance: &PlanningInstance,
    costing: &Costing,
    builds: &[Option<usize>],
) -> f64 {
    builds
        .iter()
        .enumerate()
        .filter_map(|(a, b)| {
            b.map(|c| {
                costing.alpha0 * instance.trends[c].intercept * instance.graph.arcs[a].length_km
            })
        })
        .sum()
}

/// Unweighted stage-one fixed charges in EUR (for the capex-only step).
fn build_intercepts_eur(instance: &PlanningInstance, builds: &[Option<usize>]) -> f64 {
    builds
        .iter()
        .enumerate()
        .filter_map(|(a, b)| {
            b.map(|c| instance.trends[c].intercept * instance.graph.arcs[a].length_km)
        })
        .sum()
}

/// Conservation rows `sum(out) - sum(in) >= demand` per node, with the flow
/// of each arc given as a linear expression. Returns false on a
/// constant-infeasible row.
fn add_conservation(
    p: &mut Problem,
    instance: &PlanningInstance,
    demand_of: impl Fn(usize) -> f64,
    flow_expr: impl Fn(usize) -> Vec<(Variable, f64)>,
) -> bool {
    for j in 0..instance.graph.nodes.len() {
        let mut row: Vec<(Variable, f64)> = Vec::new();
        for (a, arc) in instance.graph.arcs.iter().enumerate() {
            let sign = if arc.from == j {
                1.0
            } else if arc.to == j {
                -1.0
            } else {
                continue;
            };
            for (var, coeff) in flow_expr(a) {
                push_coeff(&mut row, var, sign * coeff);
            }
        }
        let demand = demand_of(j);
        if row.is_empty() {
            if 0.0 < demand - 1e-9 {
                return false;
            }
            continue;
        }
        p.add_constraint(row, ComparisonOp::Ge, demand);
    }
    true
}

/// Period-1 flow expressions per arc under the given modes; in relaxed
/// coupling mode this introduces capped total-flow variables first.
fn flow_expressions(
    p: &mut Problem,
    instance: &PlanningInstance,
    modes: &[ArcMode],
    q: &[Option<Variable>],
    q2: &[Option<Variable>],
) -> Vec<Vec<(Variable, f64)>> {
    let uplift = instance.horizon.pressure_uplift;
    let pinned: Vec<Vec<(Variable, f64)>> = (0..modes.len())
        .map(|a| match modes[a] {
            ArcMode::Off => Vec::new(),
            ArcMode::Keep => q[a].map(|v| (v, 1.0)).into_iter().collect(),
            ArcMode::Boost => q[a].map(|v| (v, uplift)).into_iter().collect(),
            ArcMode::New(_) => q2[a].map(|v| (v, 1.0)).into_iter().collect(),
            ArcMode::Loop(_) => {
                let mut expr: Vec<(Variable, f64)> =
                    q[a].map(|v| (v, 1.0)).into_iter().collect();
                if let Some(v) = q2[a] {
                    expr.push((v, 1.0));
                }
                expr
            }
        })
        .collect();
    match instance.coupling {
        CouplingMode::Literal => pinned,
        CouplingMode::Relaxed => {
            let max_q = instance.trends.iter().map(|t| t.q_max).fold(0.0, f64::max);
            let cap = max_q * 2.0f64.max(uplift);
            pinned
                .into_iter()
                .enumerate()
                .map(|(a, expr)| {
                    if matches!(modes[a], ArcMode::Off) {
                        return Vec::new();
                    }
                    let f = p.add_var(0.0, (0.0, cap));
                    let mut row = vec![(f, 1.0)];
                    for (var, coeff) in &expr {
                        row.push((*var, -coeff));
                    }
                    p.add_constraint(row, ComparisonOp::Le, 0.0);
                    vec![(f, 1.0)]
                })
                .collect()
        }
    }
}

/// Minimum period-0 investment (EUR) of one build combo, or None when the
/// initial scenario cannot be served.
fn min_stage1_eur(instance: &PlanningInstance, builds: &[Option<usize>]) -> Option<f64> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let q: Vec<Option<Variable>> = builds
        .iter()
        .enumerate()
        .map(|(a, b)| {
            b.map(|c| {
                let t = &instance.trends[c];
                p.add_var(
                    t.slope * instance.graph.arcs[a].length_km / MIO,
                    (t.q_min, t.q_max),
                )
            })
        })
        .collect();
    let initial = instance.scenarios.initial_scenario();
    let ok = add_conservation(
        &mut p,
        instance,
        |j| instance.graph.nodes[j].demand_t0(initial),
        |a| q[a].map(|v| (v, 1.0)).into_iter().collect(),
    );
    if !ok {
        return None;
    }
    let y_const = build_intercepts_eur(instance, builds);
    if q.iter().all(Option::is_none) {
        return Some(y_const);
    }
    let solution = p.solve().ok()?;
    Some(solution.objective() * MIO + y_const)
}

/// Full two-period cost (EUR) of one scenario under one build and mode
/// combo, stage-one capacities co-optimized (the M1 situation). None when
/// infeasible.
fn coupled_cost_eur(
    instance: &PlanningInstance,
    costing: &Costing,
    builds: &[Option<usize>],
    modes: &[ArcMode],
    scenario: &Scenario,
) -> Option<f64> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let q: Vec<Option<Variable>> = builds
        .iter()
        .enumerate()
        .map(|(a, b)| {
            b.map(|c| {
                let t = &instance.trends[c];
                let length = instance.graph.arcs[a].length_km;
                let mut coeff = costing.alpha0 * t.slope * length / MIO;
                if matches!(modes[a], ArcMode::Boost) {
                    coeff += costing.gamma
                        * instance.horizon.pressure_cost_fraction
                        * t.slope
                        * length
                        / MIO;
                }
                p.add_var(coeff, (t.q_min, t.q_max))
            })
        })
        .collect();
    let initial = instance.scenarios.initial_scenario();
    if !add_conservation(
        &mut p,
        instance,
        |j| instance.graph.nodes[j].demand_t0(initial),
        |a| q[a].map(|v| (v, 1.0)).into_iter().collect(),
    ) {
        return None;
    }
    let q2: Vec<Option<Variable>> = modes
        .iter()
        .enumerate()
        .map(|(a, mode)| match mode {
            ArcMode::New(c) | ArcMode::Loop(c) => {
                let t = &instance.trends[*c];
                Some(p.add_var(
                    costing.beta * t.slope * instance.graph.arcs[a].length_km / MIO,
                    (t.q_min, t.q_max),
                ))
            }
            _ => None,
        })
        .collect();
    let exprs = flow_expressions(&mut p, instance, modes, &q, &q2);
    if !add_conservation(
        &mut p,
        instance,
        |j| instance.graph.nodes[j].demand_t1(scenario),
        |a| exprs[a].clone(),
    ) {
        return None;
    }
    let consts = build_const_eur(instance, costing, builds)
        + combo_const_eur(instance, costing, builds, modes);
    if q.iter().all(Option::is_none) && q2.iter().all(Option::is_none) {
        return Some(consts);
    }
    let solution = p.solve().ok()?;
    Some(solution.objective() * MIO + consts)
}

/// Iterates all `(n_trends + 1)^n_arcs` build combos.
pub struct BuildCombos {
    n_options: usize,
    state: Option<Vec<usize>>,
}

impl BuildCombos {
    pub fn new(n_arcs: usize, n_trends: usize) -> Self {
        Self {
            n_options: n_trends + 1,
            state: Some(vec![0; n_arcs]),
        }
    }
}

impl Iterator for BuildCombos {
    type Item = Vec<Option<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        let state = self.state.as_mut()?;
        let combo: Vec<Option<usize>> = state
            .iter()
            .map(|&v| if v == 0 { None } else { Some(v - 1) })
            .collect();
        let mut done = true;
        for digit in state.iter_mut() {
            *digit += 1;
            if *digit < self.n_options {
                done = false;
                break;
            }
            *digit = 0;
        }
        if done {
            self.state = None;
        }
        Some(combo)
    }
}

fn enumerate_modes(
    lists: &[Vec<ArcMode>],
    modes: &mut Vec<ArcMode>,
    depth: usize,
    f: &mut impl FnMut(&[ArcMode]),
) {
    if depth == lists.len() {
        f(modes);
        return;
    }
    for i in 0..lists[depth].len() {
        modes[depth] = lists[depth][i];
        enumerate_modes(lists, modes, depth + 1, f);
    }
}

/// Minimum period-0 investment over all build combos (the successive
/// model's first step), in EUR.
pub fn oracle_m2_step1(instance: &PlanningInstance) -> Option<f64> {
    let mut best: Option<f64> = None;
    for builds in BuildCombos::new(instance.graph.arcs.len(), instance.trends.len()) {
        if let Some(i0) = min_stage1_eur(instance, &builds) {
            if best.map_or(true, |b| i0 < b) {
                best = Some(i0);
            }
        }
    }
    best
}

/// Perfect-information optimum for one scenario by exhaustive enumeration.
/// Returns EUR, or None when no design serves both periods.
pub fn oracle_m1(instance: &PlanningInstance, scenario_id: &str) -> Option<f64> {
    let scenario = instance.scenarios.get(scenario_id)?.clone();
    let costing = Costing::of(instance);
    let n_arcs = instance.graph.arcs.len();
    let mut best: Option<f64> = None;
    for builds in BuildCombos::new(n_arcs, instance.trends.len()) {
        let Some(min_i0) = min_stage1_eur(instance, &builds) else {
            continue;
        };
        let lb0 = costing.alpha0 * min_i0;
        if best.map_or(false, |b| lb0 >= b) {
            continue;
        }
        let mode_lists: Vec<Vec<ArcMode>> = builds
            .iter()
            .map(|b| modes_for(*b, instance.trends.len()))
            .collect();
        let mut modes: Vec<ArcMode> = vec![ArcMode::Off; n_arcs];
        enumerate_modes(&mode_lists, &mut modes, 0, &mut |modes| {
            let const_eur = combo_const_eur(instance, &costing, &builds, modes);
            if best.map_or(false, |b| lb0 + const_eur >= b) {
                return;
            }
            if let Some(cost) = coupled_cost_eur(instance, &costing, &builds, modes, &scenario) {
                if best.map_or(true, |b| cost < b) {
                    best = Some(cost);
                }
            }
        });
    }
    best
}

/// The coupled epigraph LP of one complete assignment: shared stage-one
/// capacities, per-scenario recourse capacities, minimize the worst regret.
/// Returns x in EUR.
fn coupled_regret_lp(
    instance: &PlanningInstance,
    costing: &Costing,
    builds: &[Option<usize>],
    scenarios: &[Scenario],
    mode_sets: &[&[ArcMode]],
    best_eur: &BTreeMap<String, f64>,
) -> Option<f64> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let q: Vec<Option<Variable>> = builds
        .iter()
        .enumerate()
        .map(|(a, b)| {
            b.map(|c| {
                let t = &instance.trends[c];
                let _ = a;
                p.add_var(0.0, (t.q_min, t.q_max))
            })
        })
        .collect();
    let initial = instance.scenarios.initial_scenario();
    if !add_conservation(
        &mut p,
        instance,
        |j| instance.graph.nodes[j].demand_t0(initial),
        |a| q[a].map(|v| (v, 1.0)).into_iter().collect(),
    ) {
        return None;
    }
    let x = p.add_var(1.0, (0.0, f64::INFINITY));
    let build_const = build_const_eur(instance, costing, builds);

    for (s, scenario) in scenarios.iter().enumerate() {
        let modes = mode_sets[s];
        let q2: Vec<Option<Variable>> = modes
            .iter()
            .enumerate()
            .map(|(a, mode)| match mode {
                ArcMode::New(c) | ArcMode::Loop(c) => {
                    let t = &instance.trends[*c];
                    let _ = a;
                    Some(p.add_var(0.0, (t.q_min, t.q_max)))
                }
                _ => None,
            })
            .collect();
        let exprs = flow_expressions(&mut p, instance, modes, &q, &q2);
        if !add_conservation(
            &mut p,
            instance,
            |j| instance.graph.nodes[j].demand_t1(scenario),
            |a| exprs[a].clone(),
        ) {
            return None;
        }
        // Epigraph row: cost_s - x <= B_s, constants folded into the rhs.
        let mut row: Vec<(Variable, f64)> = Vec::new();
        for (a, var) in q.iter().enumerate() {
            let (Some(var), Some(c)) = (var, builds[a]) else {
                continue;
            };
            let length = instance.graph.arcs[a].length_km;
            let mut coeff = costing.alpha0 * instance.trends[c].slope * length / MIO;
            if matches!(modes[a], ArcMode::Boost) {
                coeff += costing.gamma
                    * instance.horizon.pressure_cost_fraction
                    * instance.trends[c].slope
                    * length
                    / MIO;
            }
            push_coeff(&mut row, *var, coeff);
        }
        for (a, var) in q2.iter().enumerate() {
            let Some(var) = var else { continue };
            let trend = match modes[a] {
                ArcMode::New(c) | ArcMode::Loop(c) => c,
                _ => continue,
            };
            push_coeff(
                &mut row,
                *var,
                costing.beta * instance.trends[trend].slope * instance.graph.arcs[a].length_km
                    / MIO,
            );
        }
        let consts = build_const + combo_const_eur(instance, costing, builds, modes);
        push_coeff(&mut row, x, -1.0);
        p.add_constraint(row, ComparisonOp::Le, (best_eur[&scenario.id] - consts) / MIO);
    }
    let solution = p.solve().ok()?;
    Some(solution.objective() * MIO)
}

#[allow(clippy::too_many_arguments)]
fn regret_dfs(
    instance: &PlanningInstance,
    costing: &Costing,
    builds: &[Option<usize>],
    scenarios: &[Scenario],
    per_scenario: &[Vec<(Vec<ArcMode>, f64)>],
    best_eur: &BTreeMap<String, f64>,
    depth: usize,
    choice: &mut Vec<usize>,
    best_x: &mut Option<f64>,
) {
    if depth == scenarios.len() {
        let mode_sets: Vec<&[ArcMode]> = choice
            .iter()
            .enumerate()
            .map(|(s, &i)| per_scenario[s][i].0.as_slice())
            .collect();
        if let Some(x) =
            coupled_regret_lp(instance, costing, builds, scenarios, &mode_sets, best_eur)
        {
            if best_x.map_or(true, |b| x < b - 1e-12) {
                *best_x = Some(x);
            }
        }
        return;
    }
    for i in 0..per_scenario[depth].len() {
        choice[depth] = i;
        // The relaxed per-scenario costs bound the coupled costs from below:
        // chosen scenarios at their own cost, open ones at their minimum.
        let mut lb = 0.0f64;
        for s in 0..scenarios.len() {
            let cost = if s <= depth {
                per_scenario[s][choice[s]].1
            } else {
                per_scenario[s][0].1
            };
            lb = lb.max(cost - best_eur[&scenarios[s].id]);
        }
        if best_x.map_or(false, |b| lb >= b) {
            // Cost-sorted lists: later choices only raise the bound.
            break;
        }
        regret_dfs(
            instance,
            costing,
            builds,
            scenarios,
            per_scenario,
            best_eur,
            depth + 1,
            choice,
            best_x,
        );
    }
}

/// Min-max regret optimum by exhaustive enumeration, given per-scenario
/// perfect-information baselines in EUR. Returns the optimal system regret
/// in EUR.
pub fn oracle_regret(
    instance: &PlanningInstance,
    best_eur: &BTreeMap<String, f64>,
) -> Option<f64> {
    let costing = Costing::of(instance);
    let n_arcs = instance.graph.arcs.len();
    let scenarios: Vec<Scenario> = instance.scenarios.scenarios.clone();
    let mut best_x: Option<f64> = None;

    for builds in BuildCombos::new(n_arcs, instance.trends.len()) {
        let Some(min_i0) = min_stage1_eur(instance, &builds) else {
            continue;
        };
        let mode_lists: Vec<Vec<ArcMode>> = builds
            .iter()
            .map(|b| modes_for(*b, instance.trends.len()))
            .collect();
        // Per-scenario feasible modes with their decoupled (stage-one
        // co-optimized per scenario) costs: valid lower bounds for the
        // coupled problem and the DFS ordering.
        let mut per_scenario: Vec<Vec<(Vec<ArcMode>, f64)>> = Vec::new();
        let mut combo_impossible = false;
        for scenario in &scenarios {
            let mut feasible: Vec<(Vec<ArcMode>, f64)> = Vec::new();
            let mut modes: Vec<ArcMode> = vec![ArcMode::Off; n_arcs];
            let budget = best_x.map(|x| x + best_eur[&scenario.id]);
            enumerate_modes(&mode_lists, &mut modes, 0, &mut |modes| {
                let const_eur = combo_const_eur(instance, &costing, &builds, modes);
                if budget.map_or(false, |b| costing.alpha0 * min_i0 + const_eur >= b) {
                    return;
                }
                if let Some(cost) = coupled_cost_eur(instance, &costing, &builds, modes, scenario)
                {
                    feasible.push((modes.to_vec(), cost));
                }
            });
            if feasible.is_empty() {
                combo_impossible = true;
                break;
            }
            feasible.sort_by(|a, b| a.1.total_cmp(&b.1));
            per_scenario.push(feasible);
        }
        if combo_impossible {
            continue;
        }
        let lb = per_scenario
            .iter()
            .zip(&scenarios)
            .map(|(list, s)| list[0].1 - best_eur[&s.id])
            .fold(0.0f64, f64::max);
        if best_x.map_or(false, |x| lb >= x) {
            continue;
        }
        let mut choice: Vec<usize> = vec![0; scenarios.len()];
        regret_dfs(
            instance,
            &costing,
            &builds,
            &scenarios,
            &per_scenario,
            best_eur,
            0,
            &mut choice,
            &mut best_x,
        );
    }
    best_x
}

/// Deterministic toy-instance generator for the oracle-equivalence and
/// acceptance suites: a random tree with one sink, growing demands (so
/// every first stage stays upgradeable), two genuine trends.
pub fn random_instance(seed: u64, n_edges: usize, n_scenarios: usize) -> PlanningInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = n_edges + 1;

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for v in 1..n_nodes {
        let parent = rng.gen_range(0..v);
        let length = (rng.gen_range(50..400) as f64) / 10.0;
        edges.push((v, parent, length));
    }

    // Active emitters have period-0 demand; latent ones join in period 1
    // depending on the scenario.
    let mut t0: BTreeMap<String, f64> = BTreeMap::new();
    let mut latent: Vec<String> = Vec::new();
    for v in 1..n_nodes {
        let id = format!("e{v}");
        if v == 1 || rng.gen_bool(0.7) {
            t0.insert(id, (rng.gen_range(20..80) as f64) / 10.0);
        } else {
            latent.push(id);
        }
    }
    let total_t0: f64 = t0.values().sum();
    t0.insert("k".into(), -(total_t0 * rng.gen_range(1.5..2.0)));

    let mut scenarios = Vec::new();
    for s in 0..n_scenarios {
        let id = format!("S{}", s + 1);
        let mut t1: BTreeMap<String, f64> = BTreeMap::new();
        for (node, demand) in &t0 {
            if *demand > 0.0 {
                let growth = if s == 0 {
                    1.0
                } else {
                    1.0 + (rng.gen_range(0..50) as f64) / 100.0
                };
                t1.insert(node.clone(), demand * growth);
            }
        }
        if s > 0 {
            for node in &latent {
                if rng.gen_bool(0.6) {
                    t1.insert(node.clone(), (rng.gen_range(20..80) as f64) / 10.0);
                }
            }
        }
        let total: f64 = t1.values().filter(|d| **d > 0.0).sum();
        t1.insert("k".into(), -(total * 1.5));
        scenarios.push(Scenario {
            id,
            demand_t0: t0.clone(),
            demand_t1: t1,
        });
    }

    let ids: Vec<String> = (1..n_nodes).map(|v| format!("e{v}")).collect();
    let mut node_specs: Vec<(&str, NodeKind, f64, f64)> =
        vec![("k", NodeKind::Sink, 0.0, 0.0)];
    for (v, id) in ids.iter().enumerate() {
        node_specs.push((id, NodeKind::Emitter, (v + 1) as f64, 0.0));
    }
    let edge_names: Vec<(String, String, f64)> = edges
        .iter()
        .map(|&(v, parent, length)| {
            let name = |n: usize| {
                if n == 0 {
                    "k".to_string()
                } else {
                    format!("e{n}")
                }
            };
            (name(v), name(parent), length)
        })
        .collect();
    let edge_refs: Vec<(&str, &str, f64)> = edge_names
        .iter()
        .map(|(a, b, l)| (a.as_str(), b.as_str(), *l))
        .collect();
    let graph = CandidateGraph::synthetic(&node_specs, &edge_refs).unwrap();

    // Two genuine trends: an unreachable tolerance forces the full budget.
    let max_total: f64 = scenarios
        .iter()
        .flat_map(|s| [&s.demand_t0, &s.demand_t1])
        .map(|t| t.values().filter(|d| **d > 0.0).sum::<f64>())
        .fold(0.0, f64::max);
    let trends = fit_trends(
        &CostParams::default(),
        &HydraulicParams::default(),
        (max_total * 1.3).max(1.0),
        2,
        1e-9,
    )
    .unwrap()
    .trends;
    assert_eq!(trends.len(), 2);

    let horizon = HorizonParams {
        pressure_uplift: [1.2, 1.3, 1.5][rng.gen_range(0..3)],
        pressure_cost_fraction: [0.2, 0.3, 0.4][rng.gen_range(0..3)],
        om_fraction: (rng.gen_range(15..35) as f64) / 1000.0,
        ..HorizonParams::default()
    };

    PlanningInstance {
        graph,
        trends,
        scenarios: ScenarioSet {
            initial: "S1".into(),
            scenarios,
        },
        horizon,
        coupling: CouplingMode::Literal,
        om_schedule: co2net::economics::OmSchedule::Overlap,
    }
}
