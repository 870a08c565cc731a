//! Deterministic best-first branch-and-bound over the bounded simplex.
//!
//! Binaries branch on the most fractional variable (ties to the lowest
//! index), children are explored best-bound-first with a last-in preference
//! on ties, and a rounding dive at the root provides an early incumbent.
//! Indicator constraints are enforced either natively (the row joins the
//! relaxation once its condition is fixed to one, and integral leaves are
//! verified) or by big-M lowering ahead of the search. With no time limit
//! the search is exact and fully reproducible: there is no randomization,
//! so the configured seed is recorded but never used.

use super::adapter::{
    Capabilities, SolveError, SolveOptions, SolveOutcome, SolveStatus, SolverAdapter, WarmStart,
};
use super::ir::{IndicatorMode, Model, RowOp, VarKind};
use super::simplex::{solve_lp, LpProblem, LpResult, LpStatus};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

const INT_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-9;
const WARM_DIVE_NODES: usize = 2_000;

/// The bundled MILP backend.
#[derive(Debug, Clone, Default)]
pub struct BranchBoundSolver {
    pub indicator_mode: IndicatorMode,
}

impl BranchBoundSolver {
    pub fn native() -> Self {
        Self {
            indicator_mode: IndicatorMode::Native,
        }
    }

    pub fn big_m() -> Self {
        Self {
            indicator_mode: IndicatorMode::BigM,
        }
    }
}

impl SolverAdapter for BranchBoundSolver {
    fn name(&self) -> &str {
        match self.indicator_mode {
            IndicatorMode::Native => "bnb-native",
            IndicatorMode::BigM => "bnb-bigm",
        }
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            native_indicators: matches!(self.indicator_mode, IndicatorMode::Native),
            warm_start: true,
        }
    }

    fn solve(
        &self,
        model: &Model,
        options: &SolveOptions,
        warm: Option<&WarmStart>,
    ) -> Result<SolveOutcome, SolveError> {
        let lowered;
        let solve_model = match self.indicator_mode {
            IndicatorMode::Native => model,
            IndicatorMode::BigM => {
                lowered = model.lowered_to_big_m()?;
                &lowered
            }
        };
        if let Some(hints) = warm {
            for (var, value) in hints {
                let def = solve_model.vars.get(var.0).ok_or_else(|| {
                    SolveError::IncompatibleWarmStart(format!(
                        "variable index {} out of range",
                        var.0
                    ))
                })?;
                if def.kind == VarKind::Binary && (value - value.round()).abs() > INT_TOL {
                    return Err(SolveError::IncompatibleWarmStart(format!(
                        "binary {} hinted to non-integral {value}",
                        def.name
                    )));
                }
            }
        }
        let mut search = Search::new(solve_model, options);
        // A warm start seeds the incumbent through a node-capped subsearch
        // with the hinted binaries fixed.
        if let Some(hints) = warm {
            let fixings: Vec<(usize, f64, f64)> = hints
                .iter()
                .filter(|(v, _)| solve_model.vars[v.0].kind == VarKind::Binary)
                .map(|(v, x)| (v.0, x.round(), x.round()))
                .collect();
            if !fixings.is_empty() {
                search.run(&fixings, Some(WARM_DIVE_NODES));
            }
        }
        let status = search.run(&[], options.node_limit);
        if search.stalled {
            return Err(SolveError::Numerics);
        }
        let offset = solve_model.obj_offset;
        let (objective, gap) = match &search.incumbent {
            Some((obj, _)) => {
                let objective = obj + offset;
                let bound = search.proven_bound.min(*obj) + offset;
                let gap = (objective - bound).abs() / objective.abs().max(1.0);
                (Some(objective), Some(gap))
            }
            None => (None, None),
        };
        Ok(SolveOutcome {
            status,
            objective,
            best_bound: search
                .proven_bound
                .min(search.incumbent.as_ref().map_or(f64::INFINITY, |(o, _)| *o))
                + offset,
            values: search
                .incumbent
                .as_ref()
                .map(|(_, v)| v.clone())
                .unwrap_or_default(),
            gap,
            nodes: search.nodes_processed,
        })
    }
}

/// One branching decision, chained toward the root.
struct Fixing {
    var: usize,
    lb: f64,
    ub: f64,
    parent: Option<Rc<Fixing>>,
}

/// Heap key: smallest bound pops first, newest node wins ties (dive-like).
#[derive(PartialEq)]
struct NodeKey(f64, Reverse<u64>);

impl Eq for NodeKey {}

impl PartialOrd for NodeKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NodeKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| self.1.cmp(&other.1))
    }
}

struct Search<'a> {
    model: &'a Model,
    options: &'a SolveOptions,
    base: LpProblem,
    binaries: Vec<usize>,
    incumbent: Option<(f64, Vec<f64>)>,
    /// Greatest lower bound proven by the main search (offset excluded).
    proven_bound: f64,
    nodes_processed: usize,
    started: Instant,
    timed_out: bool,
    stalled: bool,
}

impl<'a> Search<'a> {
    fn new(model: &'a Model, options: &'a SolveOptions) -> Self {
        let base = LpProblem {
            obj: model.vars.iter().map(|v| v.obj).collect(),
            lb: model.vars.iter().map(|v| v.lb).collect(),
            ub: model.vars.iter().map(|v| v.ub).collect(),
            rows: model
                .rows
                .iter()
                .map(|r| {
                    (
                        r.coeffs.iter().map(|(v, c)| (v.0, *c)).collect(),
                        r.op,
                        r.rhs,
                    )
                })
                .collect(),
        };
        let binaries = model
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| i)
            .collect();
        Self {
            model,
            options,
            base,
            binaries,
            incumbent: None,
            proven_bound: f64::NEG_INFINITY,
            nodes_processed: 0,
            started: Instant::now(),
            timed_out: false,
            stalled: false,
        }
    }

    fn bounds_of(&self, chain: &Option<Rc<Fixing>>) -> (Vec<f64>, Vec<f64>) {
        let mut lb = self.base.lb.clone();
        let mut ub = self.base.ub.clone();
        let mut cursor = chain.as_ref();
        while let Some(fix) = cursor {
            lb[fix.var] = lb[fix.var].max(fix.lb);
            ub[fix.var] = ub[fix.var].min(fix.ub);
            cursor = fix.parent.as_ref();
        }
        (lb, ub)
    }

    fn node_lp(&self, chain: &Option<Rc<Fixing>>) -> LpResult {
        let (lb, ub) = self.bounds_of(chain);
        let mut rows = self.base.rows.clone();
        // Native indicators join the relaxation once their condition is
        // fixed to one.
        for ind in &self.model.indicators {
            if lb[ind.bin.0] >= 0.5 {
                rows.push((
                    ind.coeffs.iter().map(|(v, c)| (v.0, *c)).collect(),
                    ind.op,
                    ind.rhs,
                ));
            }
        }
        solve_lp(&LpProblem {
            obj: self.base.obj.clone(),
            lb,
            ub,
            rows,
        })
    }

    /// Index of an indicator whose condition is one in `values` but whose
    /// row is neither active nor satisfied.
    fn violated_indicator(&self, chain: &Option<Rc<Fixing>>, values: &[f64]) -> Option<usize> {
        let (lb, _) = self.bounds_of(chain);
        for (i, ind) in self.model.indicators.iter().enumerate() {
            if values[ind.bin.0] < 0.5 || lb[ind.bin.0] >= 0.5 {
                continue;
            }
            let lhs: f64 = ind.coeffs.iter().map(|(v, c)| c * values[v.0]).sum();
            let scale = lhs.abs().max(ind.rhs.abs()).max(1.0);
            let violated = match ind.op {
                RowOp::Le => lhs > ind.rhs + INT_TOL * scale,
                RowOp::Ge => lhs < ind.rhs - INT_TOL * scale,
                RowOp::Eq => (lhs - ind.rhs).abs() > INT_TOL * scale,
            };
            if violated {
                return Some(i);
            }
        }
        None
    }

    fn most_fractional(&self, values: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &b in &self.binaries {
            let frac = (values[b] - values[b].round()).abs();
            if frac > INT_TOL && best.map_or(true, |(_, f)| frac > f) {
                best = Some((b, frac));
            }
        }
        best.map(|(b, _)| b)
    }

    fn accept_incumbent(&mut self, objective: f64, mut values: Vec<f64>) {
        if self
            .incumbent
            .as_ref()
            .map_or(true, |(best, _)| objective < best - 1e-12)
        {
            for &b in &self.binaries {
                values[b] = values[b].round();
            }
            for (j, v) in values.iter_mut().enumerate() {
                *v = v.max(self.base.lb[j]).min(self.base.ub[j]);
            }
            self.incumbent = Some((objective, values));
        }
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((best, _)) => {
                best - PRUNE_TOL * best.abs().max(1.0) - self.options.rel_gap * best.abs()
            }
            None => f64::INFINITY,
        }
    }

    fn out_of_time(&self) -> bool {
        self.options
            .time_limit
            .map_or(false, |limit| self.started.elapsed() >= limit)
    }

    /// Best-first search below the given root fixings. Incumbents accumulate
    /// across calls; bounds are only trusted from the unrestricted search.
    fn run(&mut self, root_fixings: &[(usize, f64, f64)], node_cap: Option<usize>) -> SolveStatus {
        let mut root_chain: Option<Rc<Fixing>> = None;
        for &(var, lb, ub) in root_fixings {
            root_chain = Some(Rc::new(Fixing {
                var,
                lb,
                ub,
                parent: root_chain,
            }));
        }
        let is_main = root_fixings.is_empty();
        let mut heap: BinaryHeap<Reverse<(NodeKey, usize)>> = BinaryHeap::new();
        let mut chains: Vec<Option<Rc<Fixing>>> = Vec::new();
        let mut seq = 0u64;
        macro_rules! push_node {
            ($bound:expr, $chain:expr) => {{
                let id = chains.len();
                chains.push($chain);
                heap.push(Reverse((NodeKey($bound, Reverse(seq)), id)));
                seq += 1;
            }};
        }
        push_node!(f64::NEG_INFINITY, root_chain);
        let mut processed = 0usize;
        let mut dived = false;

        while let Some(Reverse((key, id))) = heap.pop() {
            let node_bound = key.0;
            if self.out_of_time() {
                self.timed_out = true;
                break;
            }
            if let Some(cap) = node_cap {
                if processed >= cap {
                    return if self.incumbent.is_some() {
                        SolveStatus::Feasible
                    } else {
                        SolveStatus::TimeLimit
                    };
                }
            }
            processed += 1;
            self.nodes_processed += 1;
            if is_main {
                // Best-first: the popped bound is the global lower bound.
                self.proven_bound = self.proven_bound.max(node_bound);
            }
            if node_bound >= self.cutoff() {
                continue;
            }

            let chain = chains[id].clone();
            let lp = self.node_lp(&chain);
            match lp.status {
                LpStatus::Infeasible => continue,
                LpStatus::Stalled | LpStatus::Unbounded => {
                    // Our models are bounded; anything else is numerics.
                    self.stalled = true;
                    break;
                }
                LpStatus::Optimal => {}
            }
            if lp.objective >= self.cutoff() {
                continue;
            }

            match self.most_fractional(&lp.values) {
                None => {
                    if let Some(ind_idx) = self.violated_indicator(&chain, &lp.values) {
                        // Integral but inconsistent with a dormant
                        // indicator: decide that condition explicitly.
                        let bin = self.model.indicators[ind_idx].bin.0;
                        for (lb, ub) in [(0.0, 0.0), (1.0, 1.0)] {
                            push_node!(
                                lp.objective,
                                Some(Rc::new(Fixing {
                                    var: bin,
                                    lb,
                                    ub,
                                    parent: chain.clone(),
                                }))
                            );
                        }
                    } else {
                        self.accept_incumbent(lp.objective, lp.values);
                    }
                }
                Some(var) => {
                    if !dived && is_main && self.incumbent.is_none() {
                        dived = true;
                        self.rounding_dive(&chain, &lp.values);
                    }
                    // Push the preferred child last so it pops first on ties.
                    let children = if lp.values[var] >= 0.5 {
                        [(0.0, 0.0), (1.0, 1.0)]
                    } else {
                        [(1.0, 1.0), (0.0, 0.0)]
                    };
                    for (lb, ub) in children {
                        push_node!(
                            lp.objective,
                            Some(Rc::new(Fixing {
                                var,
                                lb,
                                ub,
                                parent: chain.clone(),
                            }))
                        );
                    }
                }
            }

            if let (Some((best, _)), Some(Reverse((next_key, _)))) = (&self.incumbent, heap.peek())
            {
                let bound = next_key.0.max(self.proven_bound);
                if is_main {
                    self.proven_bound = bound;
                }
                let gap = (best - bound) / best.abs().max(1.0);
                if gap <= self.options.rel_gap + 1e-12 {
                    if is_main {
                        self.proven_bound = self.proven_bound.max(bound);
                    }
                    return SolveStatus::Optimal;
                }
            }
        }

        if self.timed_out {
            return SolveStatus::TimeLimit;
        }
        if self.stalled {
            return SolveStatus::Infeasible;
        }
        // Heap exhausted: the search space is fully explored.
        if let Some((best, _)) = &self.incumbent {
            if is_main {
                self.proven_bound = *best;
            }
            SolveStatus::Optimal
        } else {
            SolveStatus::Infeasible
        }
    }

    /// Fix binaries to their rounded relaxation values one at a time; an
    /// integral feasible endpoint becomes the first incumbent.
    fn rounding_dive(&mut self, chain: &Option<Rc<Fixing>>, root_values: &[f64]) {
        let mut chain = chain.clone();
        let mut values = root_values.to_vec();
        for _ in 0..=self.binaries.len() {
            let Some(var) = self.most_fractional(&values) else {
                if self.violated_indicator(&chain, &values).is_none() {
                    let objective: f64 = self
                        .base
                        .obj
                        .iter()
                        .zip(&values)
                        .map(|(c, x)| c * x)
                        .sum();
                    self.accept_incumbent(objective, values);
                }
                return;
            };
            let target = values[var].round();
            chain = Some(Rc::new(Fixing {
                var,
                lb: target,
                ub: target,
                parent: chain,
            }));
            let lp = self.node_lp(&chain);
            if lp.status != LpStatus::Optimal {
                return;
            }
            values = lp.values;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ir::VarId;

    fn knapsack() -> Model {
        // max 6a + 5b + 4c s.t. 2a + 3b + 4c <= 5, as a minimization.
        let mut m = Model::new("knapsack");
        let a = m.add_binary("a", -6.0);
        let b = m.add_binary("b", -5.0);
        let c = m.add_binary("c", -4.0);
        m.add_row("cap", vec![(a, 2.0), (b, 3.0), (c, 4.0)], RowOp::Le, 5.0);
        m
    }

    #[test]
    fn knapsack_optimum() {
        let out = BranchBoundSolver::native()
            .solve(&knapsack(), &SolveOptions::default(), None)
            .unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective.unwrap() - -11.0).abs() < 1e-9);
        assert_eq!(out.values[0], 1.0);
        assert_eq!(out.values[1], 1.0);
        assert_eq!(out.values[2], 0.0);
        assert!((out.best_bound - -11.0).abs() < 1e-9);
        assert!(out.gap.unwrap() < 1e-9);
    }

    #[test]
    fn infeasible_binary_model() {
        let mut m = Model::new("infeasible");
        let a = m.add_binary("a", 1.0);
        m.add_row("impossible", vec![(a, 1.0)], RowOp::Ge, 2.0);
        let out = BranchBoundSolver::native()
            .solve(&m, &SolveOptions::default(), None)
            .unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert!(out.objective.is_none());
    }

    fn indicator_model() -> Model {
        // min x + 10 z with x >= 3 and the indicator z = 1 -> x = 4.
        let mut m = Model::new("indicator");
        let x = m.add_continuous("x", 0.0, 10.0, 1.0);
        let z = m.add_binary("z", 10.0);
        m.add_row("floor", vec![(x, 1.0)], RowOp::Ge, 3.0);
        m.add_indicator("pin", z, vec![(x, 1.0)], RowOp::Eq, 4.0)
            .unwrap();
        m
    }

    #[test]
    fn native_and_big_m_agree_on_indicators() {
        let m = indicator_model();
        let native = BranchBoundSolver::native()
            .solve(&m, &SolveOptions::default(), None)
            .unwrap();
        let big_m = BranchBoundSolver::big_m()
            .solve(&m, &SolveOptions::default(), None)
            .unwrap();
        assert_eq!(native.status, SolveStatus::Optimal);
        assert_eq!(big_m.status, SolveStatus::Optimal);
        let (a, b) = (native.objective.unwrap(), big_m.objective.unwrap());
        assert!(
            (a - b).abs() <= 1e-6 * a.abs().max(1.0),
            "native {a} vs big-M {b}"
        );
        assert!((a - 3.0).abs() < 1e-9, "z = 0 with x = 3 is optimal");
    }

    #[test]
    fn indicator_forces_row_when_condition_on() {
        let mut m = Model::new("indicator_on");
        let x = m.add_continuous("x", 0.0, 10.0, 1.0);
        let z = m.add_binary("z", -100.0);
        m.add_indicator("pin", z, vec![(x, 1.0)], RowOp::Eq, 4.0)
            .unwrap();
        let out = BranchBoundSolver::native()
            .solve(&m, &SolveOptions::default(), None)
            .unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_eq!(out.values[1], 1.0);
        assert!((out.values[0] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn warm_start_accepts_and_rejects() {
        let m = knapsack();
        let warm: WarmStart = vec![(VarId(0), 1.0), (VarId(1), 1.0), (VarId(2), 0.0)];
        let out = BranchBoundSolver::native()
            .solve(&m, &SolveOptions::default(), Some(&warm))
            .unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective.unwrap() - -11.0).abs() < 1e-9);

        let bad: WarmStart = vec![(VarId(0), 0.4)];
        assert!(matches!(
            BranchBoundSolver::native().solve(&m, &SolveOptions::default(), Some(&bad)),
            Err(SolveError::IncompatibleWarmStart(_))
        ));
        let out_of_range: WarmStart = vec![(VarId(99), 1.0)];
        assert!(matches!(
            BranchBoundSolver::native().solve(&m, &SolveOptions::default(), Some(&out_of_range)),
            Err(SolveError::IncompatibleWarmStart(_))
        ));
    }

    #[test]
    fn random_small_milps_match_enumeration() {
        let mut state = 0xabcdef12u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for case in 0..40 {
            let n = 3 + (next() % 4) as usize;
            let m_rows = 2 + (next() % 3) as usize;
            let mut model = Model::new(format!("rand{case}"));
            let vars: Vec<VarId> = (0..n)
                .map(|i| model.add_binary(format!("b{i}"), ((next() % 19) as f64) - 9.0))
                .collect();
            for r in 0..m_rows {
                let coeffs: Vec<(VarId, f64)> = vars
                    .iter()
                    .map(|&v| (v, ((next() % 11) as f64) - 5.0))
                    .collect();
                let rhs = ((next() % 13) as f64) - 4.0;
                let op = if next() % 2 == 0 { RowOp::Le } else { RowOp::Ge };
                model.add_row(format!("r{r}"), coeffs, op, rhs);
            }
            let out = BranchBoundSolver::native()
                .solve(&model, &SolveOptions::default(), None)
                .unwrap();
            let mut best: Option<f64> = None;
            for mask in 0..(1u32 << n) {
                let assign: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
                let ok = model.rows.iter().all(|row| {
                    let lhs: f64 = row.coeffs.iter().map(|(v, c)| c * assign[v.0]).sum();
                    match row.op {
                        RowOp::Le => lhs <= row.rhs + 1e-9,
                        RowOp::Ge => lhs >= row.rhs - 1e-9,
                        RowOp::Eq => (lhs - row.rhs).abs() <= 1e-9,
                    }
                });
                if ok {
                    let obj = model.objective_value(&assign);
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
            match best {
                Some(expected) => {
                    assert_eq!(out.status, SolveStatus::Optimal, "case {case}");
                    let got = out.objective.unwrap();
                    assert!(
                        (got - expected).abs() <= 1e-6 * expected.abs().max(1.0),
                        "case {case}: got {got}, enumeration {expected}"
                    );
                }
                None => assert_eq!(out.status, SolveStatus::Infeasible, "case {case}"),
            }
        }
    }

    #[test]
    fn node_limit_reports_feasible() {
        let mut m = Model::new("wide");
        let vars: Vec<VarId> = (0..14)
            .map(|i| m.add_binary(format!("b{i}"), -1.0))
            .collect();
        let coeffs: Vec<(VarId, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
        m.add_row("cap", coeffs, RowOp::Le, 7.3);
        let options = SolveOptions {
            node_limit: Some(3),
            ..SolveOptions::default()
        };
        let out = BranchBoundSolver::native()
            .solve(&m, &options, None)
            .unwrap();
        assert!(matches!(
            out.status,
            SolveStatus::Feasible | SolveStatus::Optimal
        ));
    }

    #[test]
    fn rel_gap_terminates_early_with_valid_incumbent() {
        let m = knapsack();
        let options = SolveOptions {
            rel_gap: 0.5,
            ..SolveOptions::default()
        };
        let out = BranchBoundSolver::native().solve(&m, &options, None).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        let obj = out.objective.unwrap();
        assert!(obj <= -6.0, "incumbent {obj} worse than any single item");
        assert!(out.gap.unwrap() <= 0.5 + 1e-9);
    }
}
