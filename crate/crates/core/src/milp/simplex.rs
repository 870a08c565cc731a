//! Bounded-variable two-phase primal simplex on a dense tableau.
//!
//! Rows become equalities with one slack each (`a.x + s = b`; the comparison
//! lives in the slack bounds). Infeasible initial slacks get a phase-1
//! artificial. Pricing is Dantzig with a permanent switch to Bland's rule
//! after a stall, which rules out cycling. Problem sizes here are a few
//! hundred rows and columns, so a dense tableau with a periodic refresh of
//! the basic values is accurate enough.

use super::ir::RowOp;

const TOL_COST: f64 = 1e-9;
const TOL_PIVOT: f64 = 1e-9;
const TOL_FEAS: f64 = 1e-7;
const TOL_RATIO_TIE: f64 = 1e-12;
const REFRESH_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    /// Structural variable values (empty unless optimal).
    pub values: Vec<f64>,
}

/// A linear program over structural variables with finite lower bounds.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub obj: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub rows: Vec<(Vec<(usize, f64)>, RowOp, f64)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum At {
    Lower,
    Upper,
    Basic,
}

struct Tableau {
    n_total: usize,
    m: usize,
    /// Dense B^-1 A, m rows by n_total columns.
    t: Vec<Vec<f64>>,
    /// B^-1 b.
    b_hat: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    at: Vec<At>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    x_basic: Vec<f64>,
}

impl Tableau {
    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.at[j] {
            At::Lower => self.lb[j],
            At::Upper => self.ub[j],
            At::Basic => unreachable!("basic variables have no bound value"),
        }
    }

    fn refresh_basics(&mut self) {
        for i in 0..self.m {
            let mut v = self.b_hat[i];
            for j in 0..self.n_total {
                if self.at[j] != At::Basic {
                    let x = self.nonbasic_value(j);
                    if x != 0.0 {
                        v -= self.t[i][j] * x;
                    }
                }
            }
            self.x_basic[i] = v;
        }
    }

    fn objective(&self) -> f64 {
        let mut obj = 0.0;
        for j in 0..self.n_total {
            if self.at[j] != At::Basic {
                let x = self.nonbasic_value(j);
                if x != 0.0 {
                    obj += self.cost[j] * x;
                }
            }
        }
        for i in 0..self.m {
            obj += self.cost[self.basis[i]] * self.x_basic[i];
        }
        obj
    }

    /// Entering variable under the current pricing rule, with its direction.
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n_total {
            if self.at[j] == At::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let mut red = self.cost[j];
            for i in 0..self.m {
                let c = self.cost[self.basis[i]];
                if c != 0.0 {
                    red -= c * self.t[i][j];
                }
            }
            let dir = match self.at[j] {
                At::Lower if red < -TOL_COST => 1.0,
                At::Upper if red > TOL_COST => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.map_or(true, |(_, _, score)| red.abs() > score) {
                best = Some((j, dir, red.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Runs the simplex to optimality for the current cost vector.
    fn optimize(&mut self) -> LpStatus {
        let mut bland = false;
        let mut stalled_iters = 0usize;
        let mut last_obj = f64::INFINITY;
        let iter_cap = 50_000 + 200 * (self.m + self.n_total);
        for iter in 0..iter_cap {
            if iter % REFRESH_EVERY == 0 {
                self.refresh_basics();
            }
            let Some((j, dir)) = self.price(bland) else {
                return LpStatus::Optimal;
            };

            // Bounded ratio test over the basics, plus the entering span.
            let mut t_limit = self.ub[j] - self.lb[j];
            let mut leaving: Option<(usize, f64, bool)> = None;
            for i in 0..self.m {
                let alpha = self.t[i][j] * dir;
                let b = self.basis[i];
                let (limit, hit_upper) = if alpha > TOL_PIVOT {
                    if !self.lb[b].is_finite() {
                        continue;
                    }
                    (((self.x_basic[i] - self.lb[b]) / alpha).max(0.0), false)
                } else if alpha < -TOL_PIVOT {
                    if !self.ub[b].is_finite() {
                        continue;
                    }
                    (((self.ub[b] - self.x_basic[i]) / -alpha).max(0.0), true)
                } else {
                    continue;
                };
                if limit < t_limit - TOL_RATIO_TIE {
                    t_limit = limit;
                    leaving = Some((i, alpha.abs(), hit_upper));
                } else if limit <= t_limit + TOL_RATIO_TIE {
                    t_limit = t_limit.min(limit);
                    let candidate = (i, alpha.abs(), hit_upper);
                    leaving = Some(match leaving {
                        None => candidate,
                        Some(current) => {
                            let take = if bland {
                                self.basis[candidate.0] < self.basis[current.0]
                            } else {
                                candidate.1 > current.1
                            };
                            if take {
                                candidate
                            } else {
                                current
                            }
                        }
                    });
                }
            }
            if t_limit.is_infinite() {
                return LpStatus::Unbounded;
            }
            let step = t_limit.max(0.0);

            match leaving {
                None => {
                    // Bound flip of the entering variable.
                    for i in 0..self.m {
                        self.x_basic[i] -= self.t[i][j] * dir * step;
                    }
                    self.at[j] = match self.at[j] {
                        At::Lower => At::Upper,
                        At::Upper => At::Lower,
                        At::Basic => unreachable!(),
                    };
                }
                Some((r, _, hit_upper)) => {
                    let entering_value = self.nonbasic_value(j) + dir * step;
                    for i in 0..self.m {
                        if i != r {
                            self.x_basic[i] -= self.t[i][j] * dir * step;
                        }
                    }
                    let old = self.basis[r];
                    self.at[old] = if hit_upper { At::Upper } else { At::Lower };
                    self.at[j] = At::Basic;
                    self.basis[r] = j;
                    self.x_basic[r] = entering_value;
                    // Gauss-Jordan pivot on (r, j).
                    let pivot = self.t[r][j];
                    for v in self.t[r].iter_mut() {
                        *v /= pivot;
                    }
                    self.b_hat[r] /= pivot;
                    for i in 0..self.m {
                        if i == r {
                            continue;
                        }
                        let factor = self.t[i][j];
                        if factor != 0.0 {
                            let (head, tail) = self.t.split_at_mut(i.max(r));
                            let (row_i, row_r) = if i < r {
                                (&mut head[i], &tail[0])
                            } else {
                                (&mut tail[0], &head[r])
                            };
                            for k in 0..self.n_total {
                                row_i[k] -= factor * row_r[k];
                            }
                            self.b_hat[i] -= factor * self.b_hat[r];
                        }
                    }
                }
            }

            let obj = self.objective();
            if obj < last_obj - 1e-12 {
                last_obj = obj;
                stalled_iters = 0;
            } else {
                stalled_iters += 1;
                if stalled_iters > 200 + self.m {
                    bland = true;
                }
            }
        }
        LpStatus::Stalled
    }
}

/// Solves the LP. Structural lower bounds must be finite.
pub fn solve_lp(p: &LpProblem) -> LpResult {
    let n = p.obj.len();
    debug_assert!(p.lb.iter().all(|l| l.is_finite()), "finite lower bounds");
    for j in 0..n {
        if p.lb[j] > p.ub[j] + 1e-12 {
            return LpResult {
                status: LpStatus::Infeasible,
                objective: 0.0,
                values: Vec::new(),
            };
        }
    }
    let m = p.rows.len();
    if m == 0 {
        let mut values = vec![0.0; n];
        let mut objective = 0.0;
        for j in 0..n {
            values[j] = if p.obj[j] >= 0.0 {
                p.lb[j]
            } else if p.ub[j].is_finite() {
                p.ub[j]
            } else {
                return LpResult {
                    status: LpStatus::Unbounded,
                    objective: f64::NEG_INFINITY,
                    values: Vec::new(),
                };
            };
            objective += p.obj[j] * values[j];
        }
        return LpResult {
            status: LpStatus::Optimal,
            objective,
            values,
        };
    }

    // Layout: structural | slacks | artificials.
    let mut lb = p.lb.clone();
    let mut ub = p.ub.clone();
    for (_, op, _) in &p.rows {
        match op {
            RowOp::Le => {
                lb.push(0.0);
                ub.push(f64::INFINITY);
            }
            RowOp::Ge => {
                lb.push(f64::NEG_INFINITY);
                ub.push(0.0);
            }
            RowOp::Eq => {
                lb.push(0.0);
                ub.push(0.0);
            }
        }
    }

    let mut t: Vec<Vec<f64>> = vec![vec![0.0; n + m]; m];
    let mut rhs = vec![0.0; m];
    for (i, (coeffs, _, b)) in p.rows.iter().enumerate() {
        for (j, c) in coeffs {
            t[i][*j] += c;
        }
        t[i][n + i] = 1.0;
        rhs[i] = *b;
    }

    // Nonbasic start: structural at lower bound, slacks basic.
    let mut at = vec![At::Lower; n + m];
    let mut basis = Vec::with_capacity(m);
    let mut x_basic = vec![0.0; m];
    for i in 0..m {
        at[n + i] = At::Basic;
        basis.push(n + i);
        let mut beta = rhs[i];
        for j in 0..n {
            if t[i][j] != 0.0 && p.lb[j] != 0.0 {
                beta -= t[i][j] * p.lb[j];
            }
        }
        x_basic[i] = beta;
    }

    // Phase-1 artificials for rows whose initial slack violates its bounds.
    let mut artificials: Vec<usize> = Vec::new();
    let mut n_total = n + m;
    for i in 0..m {
        let s = n + i;
        let beta = x_basic[i];
        let (sl, su) = (lb[s], ub[s]);
        if beta > su + TOL_FEAS || beta < sl - TOL_FEAS {
            let clamp = if beta > su { su } else { sl };
            let residual = beta - clamp;
            let col = n_total;
            n_total += 1;
            for (r, row) in t.iter_mut().enumerate() {
                row.push(if r == i { residual.signum() } else { 0.0 });
            }
            lb.push(0.0);
            ub.push(f64::INFINITY);
            at.push(At::Basic);
            at[s] = if beta > su { At::Upper } else { At::Lower };
            basis[i] = col;
            x_basic[i] = residual.abs();
            artificials.push(col);
            // Scale the row so the basic (artificial) coefficient is +1.
            if residual < 0.0 {
                for v in t[i].iter_mut() {
                    *v = -*v;
                }
                rhs[i] = -rhs[i];
            }
        }
    }

    let mut tab = Tableau {
        n_total,
        m,
        b_hat: rhs,
        t,
        lb,
        ub,
        at,
        basis,
        cost: vec![0.0; n_total],
        x_basic,
    };

    if !artificials.is_empty() {
        for &a in &artificials {
            tab.cost[a] = 1.0;
        }
        match tab.optimize() {
            LpStatus::Optimal => {}
            other => {
                debug_assert!(other == LpStatus::Stalled, "phase 1 is bounded and feasible");
                return LpResult {
                    status: LpStatus::Stalled,
                    objective: 0.0,
                    values: Vec::new(),
                };
            }
        }
        tab.refresh_basics();
        if tab.objective() > TOL_FEAS {
            return LpResult {
                status: LpStatus::Infeasible,
                objective: 0.0,
                values: Vec::new(),
            };
        }
        // Freeze artificials at zero for phase 2.
        for &a in &artificials {
            tab.lb[a] = 0.0;
            tab.ub[a] = 0.0;
            if tab.at[a] != At::Basic {
                tab.at[a] = At::Lower;
            }
        }
    }

    for j in 0..n_total {
        tab.cost[j] = if j < n { p.obj[j] } else { 0.0 };
    }
    let status = tab.optimize();
    if status != LpStatus::Optimal {
        return LpResult {
            status,
            objective: if status == LpStatus::Unbounded {
                f64::NEG_INFINITY
            } else {
                0.0
            },
            values: Vec::new(),
        };
    }
    tab.refresh_basics();
    let mut values = vec![0.0; n];
    for j in 0..n {
        if tab.at[j] != At::Basic {
            values[j] = tab.nonbasic_value(j);
        }
    }
    for i in 0..m {
        let b = tab.basis[i];
        if b < n {
            values[b] = tab.x_basic[i];
        }
    }
    let objective = (0..n).map(|j| p.obj[j] * values[j]).sum();
    LpResult {
        status: LpStatus::Optimal,
        objective,
        values,
    }
}
