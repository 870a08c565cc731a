//! Solver-independent model representation.
//!
//! A model is a minimization over continuous and binary variables with
//! linear rows and indicator constraints of the form `bin = 1 => row`.
//! Indicators can be lowered to big-M rows whose constants come from the
//! variable bounds, never from a magic number; terms without finite bounds
//! are refused with a diagnostic.

use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("variable {0} out of range")]
    BadVar(usize),
    #[error("cannot bound indicator term: variable {name} has bounds [{lb}, {ub}]")]
    UnboundedTerm { name: String, lb: f64, ub: f64 },
    #[error("indicator condition {0} must be a binary variable")]
    NonBinaryCondition(String),
}

/// Index of a variable inside its model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct VarDef {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    pub obj: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub op: RowOp,
    pub rhs: f64,
}

/// `bin = 1` forces `coeffs (op) rhs`.
#[derive(Debug, Clone)]
pub struct Indicator {
    pub name: String,
    pub bin: VarId,
    pub coeffs: Vec<(VarId, f64)>,
    pub op: RowOp,
    pub rhs: f64,
}

/// How indicator constraints reach the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndicatorMode {
    /// The solver enforces indicators by branching on their conditions.
    #[default]
    Native,
    /// Indicators are lowered to big-M rows before solving.
    BigM,
}

/// A minimization model.
#[derive(Debug, Clone, Default)]
pub struct Model {
    pub name: String,
    pub vars: Vec<VarDef>,
    pub rows: Vec<Row>,
    pub indicators: Vec<Indicator>,
    /// Constant added to the objective (reported, not optimized).
    pub obj_offset: f64,
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lb: f64,
        ub: f64,
        obj: f64,
    ) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(VarDef {
            name: name.into(),
            kind,
            lb,
            ub,
            obj,
        });
        id
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lb: f64, ub: f64, obj: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lb, ub, obj)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, obj)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        op: RowOp,
        rhs: f64,
    ) {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            op,
            rhs,
        });
    }

    pub fn add_indicator(
        &mut self,
        name: impl Into<String>,
        bin: VarId,
        coeffs: Vec<(VarId, f64)>,
        op: RowOp,
        rhs: f64,
    ) -> Result<(), ModelError> {
        if self.vars[bin.0].kind != VarKind::Binary {
            return Err(ModelError::NonBinaryCondition(self.vars[bin.0].name.clone()));
        }
        self.indicators.push(Indicator {
            name: name.into(),
            bin,
            coeffs,
            op,
            rhs,
        });
        Ok(())
    }

    pub fn num_binaries(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    /// Objective value of an assignment, including the offset.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.obj_offset
            + self
                .vars
                .iter()
                .zip(values)
                .map(|(v, x)| v.obj * x)
                .sum::<f64>()
    }

    /// Lowers every indicator into big-M rows; the result has no indicators.
    pub fn lowered_to_big_m(&self) -> Result<Model, ModelError> {
        let mut model = self.clone();
        model.indicators.clear();
        for ind in &self.indicators {
            let rows = linearize_indicator(self, ind)?;
            model.rows.extend(rows);
        }
        Ok(model)
    }

    /// Writes the model in CPLEX LP text format (indicators included).
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        writeln!(out, "\\ {}", self.name).unwrap();
        writeln!(out, "Minimize").unwrap();
        let mut obj = String::from(" obj:");
        for (i, v) in self.vars.iter().enumerate() {
            if v.obj != 0.0 {
                write!(obj, " {} {}", signed(v.obj), v.name).unwrap();
                let _ = i;
            }
        }
        if self.obj_offset != 0.0 {
            write!(obj, " {}", signed(self.obj_offset)).unwrap();
        }
        writeln!(out, "{obj}").unwrap();
        writeln!(out, "Subject To").unwrap();
        for row in &self.rows {
            writeln!(out, " {}: {}", row.name, row_text(self, &row.coeffs, row.op, row.rhs))
                .unwrap();
        }
        for ind in &self.indicators {
            writeln!(
                out,
                " {}: {} = 1 -> {}",
                ind.name,
                self.vars[ind.bin.0].name,
                row_text(self, &ind.coeffs, ind.op, ind.rhs)
            )
            .unwrap();
        }
        writeln!(out, "Bounds").unwrap();
        for v in &self.vars {
            if v.ub.is_finite() {
                writeln!(out, " {} <= {} <= {}", v.lb, v.name, v.ub).unwrap();
            } else {
                writeln!(out, " {} <= {}", v.lb, v.name).unwrap();
            }
        }
        let binaries: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            writeln!(out, "Binaries").unwrap();
            writeln!(out, " {}", binaries.join(" ")).unwrap();
        }
        writeln!(out, "End").unwrap();
        out
    }
}

fn signed(v: f64) -> String {
    if v < 0.0 {
        format!("- {}", -v)
    } else {
        format!("+ {v}")
    }
}

fn row_text(model: &Model, coeffs: &[(VarId, f64)], op: RowOp, rhs: f64) -> String {
    let mut text = String::new();
    for (var, coeff) in coeffs {
        write!(text, "{} {} ", signed(*coeff), model.vars[var.0].name).unwrap();
    }
    let op = match op {
        RowOp::Le => "<=",
        RowOp::Ge => ">=",
        RowOp::Eq => "=",
    };
    write!(text, "{op} {rhs}").unwrap();
    text
}

/// Range of a linear expression over the variable boxes.
fn expr_range(model: &Model, coeffs: &[(VarId, f64)]) -> Result<(f64, f64), ModelError> {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (var, coeff) in coeffs {
        if *coeff == 0.0 {
            continue;
        }
        let def = model.vars.get(var.0).ok_or(ModelError::BadVar(var.0))?;
        let (a, b) = (coeff * def.lb, coeff * def.ub);
        let (term_lo, term_hi) = (a.min(b), a.max(b));
        if !term_lo.is_finite() || !term_hi.is_finite() {
            return Err(ModelError::UnboundedTerm {
                name: def.name.clone(),
                lb: def.lb,
                ub: def.ub,
            });
        }
        lo += term_lo;
        hi += term_hi;
    }
    Ok((lo, hi))
}

/// Big-M rows enforcing `bin = 1 => coeffs (op) rhs`.
///
/// The constants are the exact expression range over the variable boxes:
/// with the condition off, a `<=` is slack by `hi - rhs` and a `>=` by
/// `rhs - lo`.
pub fn linearize_indicator(model: &Model, ind: &Indicator) -> Result<Vec<Row>, ModelError> {
    if model.vars[ind.bin.0].kind != VarKind::Binary {
        return Err(ModelError::NonBinaryCondition(
            model.vars[ind.bin.0].name.clone(),
        ));
    }
    let (lo, hi) = expr_range(model, &ind.coeffs)?;
    let mut rows = Vec::new();
    if matches!(ind.op, RowOp::Le | RowOp::Eq) {
        // expr + (hi - rhs) * bin <= hi
        let mut coeffs = ind.coeffs.clone();
        coeffs.push((ind.bin, hi.max(ind.rhs) - ind.rhs));
        rows.push(Row {
            name: format!("{}_le", ind.name),
            coeffs,
            op: RowOp::Le,
            rhs: hi.max(ind.rhs),
        });
    }
    if matches!(ind.op, RowOp::Ge | RowOp::Eq) {
        // expr + (lo - rhs) * bin >= lo
        let mut coeffs = ind.coeffs.clone();
        coeffs.push((ind.bin, lo.min(ind.rhs) - ind.rhs));
        rows.push(Row {
            name: format!("{}_ge", ind.name),
            coeffs,
            op: RowOp::Ge,
            rhs: lo.min(ind.rhs),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Model, VarId, VarId) {
        let mut m = Model::new("toy");
        let x = m.add_continuous("x", 0.0, 10.0, 1.0);
        let z = m.add_binary("z", 0.0);
        (m, x, z)
    }

    #[test]
    fn linearization_is_exact_at_fixed_condition() {
        let (mut m, x, z) = toy();
        m.add_indicator("link", z, vec![(x, 1.0)], RowOp::Eq, 4.0).unwrap();
        let rows = linearize_indicator(&m, &m.indicators[0]).unwrap();
        assert_eq!(rows.len(), 2);
        // z = 1: both rows collapse to x <= 4 and x >= 4.
        let eval = |row: &Row, x_val: f64, z_val: f64| -> (f64, f64) {
            let lhs: f64 = row
                .coeffs
                .iter()
                .map(|(v, c)| c * if v.0 == 0 { x_val } else { z_val })
                .sum();
            (lhs, row.rhs)
        };
        let (lhs, rhs) = eval(&rows[0], 4.0, 1.0);
        assert!(lhs <= rhs + 1e-12);
        let (lhs, rhs) = eval(&rows[0], 4.1, 1.0);
        assert!(lhs > rhs);
        // z = 0: slack by exactly the expression range on each side.
        let (lhs, rhs) = eval(&rows[0], 10.0, 0.0);
        assert!((rhs - lhs).abs() < 1e-12, "<= side slack is hi - expr");
        let (lhs, rhs) = eval(&rows[1], 0.0, 0.0);
        assert!((rhs - lhs).abs() < 1e-12, ">= side slack is expr - lo");
    }

    #[test]
    fn unbounded_term_refused() {
        let mut m = Model::new("bad");
        let x = m.add_continuous("x", 0.0, f64::INFINITY, 1.0);
        let z = m.add_binary("z", 0.0);
        m.add_indicator("link", z, vec![(x, 1.0)], RowOp::Le, 4.0).unwrap();
        assert!(matches!(
            linearize_indicator(&m, &m.indicators[0]),
            Err(ModelError::UnboundedTerm { .. })
        ));
    }

    #[test]
    fn non_binary_condition_refused() {
        let (mut m, x, _) = toy();
        let y = m.add_continuous("y", 0.0, 1.0, 0.0);
        assert!(matches!(
            m.add_indicator("link", y, vec![(x, 1.0)], RowOp::Le, 4.0),
            Err(ModelError::NonBinaryCondition(_))
        ));
    }

    #[test]
    fn lp_format_mentions_everything() {
        let (mut m, x, z) = toy();
        m.add_row("cap", vec![(x, 1.0), (z, 2.0)], RowOp::Le, 8.0);
        m.add_indicator("link", z, vec![(x, 1.0)], RowOp::Ge, 1.0).unwrap();
        let text = m.to_lp_format();
        for needle in ["Minimize", "Subject To", "cap:", "link:", "-> ", "Binaries", "End"] {
            assert!(text.contains(needle), "missing {needle} in:\n{text}");
        }
    }

    #[test]
    fn objective_value_includes_offset() {
        let (mut m, _, _) = toy();
        m.obj_offset = 5.0;
        assert_eq!(m.objective_value(&[2.0, 0.0]), 7.0);
    }
}
