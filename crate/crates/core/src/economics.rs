//! Cost aggregates, discounting and the potential/regret/benefit report.
//!
//! All monetary amounts are EUR internally; reports round to 0.001 million
//! EUR. Period-1 capex is prorated by `(n2 - n1) / n2` because late
//! investments keep a rest value beyond the planning horizon. O&M is an
//! annual fraction of the cumulative investment, discounted per year; the
//! period-0 sum runs over years `1..=n1` and the period-1 sum over
//! `n1..=n2`, so year `n1` is counted in both. That overlap follows the
//! printed definitions; [`OmSchedule::NoOverlap`] starts the second sum at
//! `n1 + 1` instead.

use crate::scenario::HorizonParams;
use crate::trends::{arc_capex, Trend, TrendError};
use serde::{Deserialize, Serialize};

/// Which years the period-1 O&M sum covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OmSchedule {
    /// Years `n1..=n2` (the literal definition; year n1 counted twice).
    #[default]
    Overlap,
    /// Years `n1+1..=n2`.
    NoOverlap,
}

/// Discounted O&M over the inclusive year range `from_year..=to_year`:
/// `sum_n om * base / (1 + tau)^n`.
pub fn om_discounted(base: f64, om: f64, tau: f64, from_year: u32, to_year: u32) -> f64 {
    (from_year..=to_year)
        .map(|n| om * base / (1.0 + tau).powi(n as i32))
        .sum()
}

/// Scalar multipliers derived from the horizon parameters, applied to capex
/// sums to obtain discounted O&M and the prorated totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonFactors {
    /// Discounted O&M per EUR of period-0 investment (years 1..=n1).
    pub om0: f64,
    /// Discounted O&M per EUR of cumulative investment in period 1.
    pub om1: f64,
    /// Written-off fraction of period-1 capex, `(n2 - n1) / n2`.
    pub proration: f64,
}

impl HorizonFactors {
    pub fn new(h: &HorizonParams, schedule: OmSchedule) -> Self {
        let n1 = h.years_to_second_stage;
        let n2 = h.planning_years;
        let from = match schedule {
            OmSchedule::Overlap => n1,
            OmSchedule::NoOverlap => n1 + 1,
        };
        Self {
            om0: om_discounted(1.0, h.om_fraction, h.discount_rate, 1, n1),
            om1: om_discounted(1.0, h.om_fraction, h.discount_rate, from, n2),
            proration: h.proration(),
        }
    }
}

/// Total investment of one period: `sum (slope * flow + intercept * built) * length`.
///
/// Entries are `(built trend with its flow, arc length in km)`; arcs without
/// a build contribute nothing.
pub fn investment_cost(
    entries: &[(Option<(usize, f64)>, f64)],
    trends: &[Trend],
) -> Result<f64, TrendError> {
    let mut total = 0.0;
    for (build, length_km) in entries {
        if let Some((trend_idx, flow)) = build {
            total += arc_capex(*flow, true, &trends[*trend_idx], *length_km)?;
        }
    }
    Ok(total)
}

/// Scenario total: `I0 + O0 + (n2-n1)/n2 * I1 + O1 + R`.
pub fn scenario_total(i0: f64, o0: f64, i1: f64, o1: f64, r: f64, n1: u32, n2: u32) -> f64 {
    i0 + o0 + (n2 - n1) as f64 / n2 as f64 * i1 + o1 + r
}

/// Per-scenario cost decomposition of a plan, all in EUR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Period-0 investment.
    pub i0: f64,
    /// Discounted period-0 O&M.
    pub o0: f64,
    /// Period-1 investment (before proration).
    pub i1: f64,
    /// Restructuring cost (pressure increases).
    pub restructuring: f64,
    /// Discounted period-1 O&M on the cumulative investment.
    pub o1: f64,
    /// Prorated total.
    pub total: f64,
    /// Perfect-information optimum for the scenario, when known.
    pub best: Option<f64>,
    /// `total - best`, when `best` is known.
    pub regret: Option<f64>,
}

impl CostBreakdown {
    /// Builds the breakdown from raw capex sums using the horizon factors.
    pub fn from_investments(
        i0: f64,
        i1: f64,
        restructuring: f64,
        h: &HorizonParams,
        schedule: OmSchedule,
    ) -> Self {
        let f = HorizonFactors::new(h, schedule);
        let o0 = f.om0 * i0;
        let o1 = f.om1 * (i0 + i1 + restructuring);
        let total = scenario_total(
            i0,
            o0,
            i1,
            o1,
            restructuring,
            h.years_to_second_stage,
            h.planning_years,
        );
        Self {
            i0,
            o0,
            i1,
            restructuring,
            o1,
            total,
            best: None,
            regret: None,
        }
    }

    pub fn with_best(mut self, best: f64) -> Self {
        self.best = Some(best);
        self.regret = Some(self.total - best);
        self
    }
}

/// One row of the model-comparison report, all values in EUR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub scenario: String,
    pub z_m1: f64,
    pub z_m2: f64,
    pub z_regret: f64,
    /// Savings of perfect information: `z_m2 - z_m1`.
    pub potential: f64,
    /// Cost of the regret plan over the perfect-information plan: `z_regret - z_m1`.
    pub regret: f64,
    /// Savings of the regret plan over successive planning: `z_m2 - z_regret`.
    pub benefit: f64,
}

/// The full comparison report plus the system regret (worst row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub rows: Vec<RegretRow>,
    /// `max_s regret(s)`.
    pub system_regret: f64,
}

/// A reported value that disagrees with a supplied reference table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDeviation {
    pub scenario: String,
    pub column: &'static str,
    pub computed: f64,
    pub expected: f64,
}

/// Builds the potential/regret/benefit report from per-scenario totals
/// `(scenario, z_m1, z_m2, z_regret)`.
pub fn regret_report(totals: &[(String, f64, f64, f64)]) -> RegretReport {
    let rows: Vec<RegretRow> = totals
        .iter()
        .map(|(scenario, z_m1, z_m2, z_regret)| RegretRow {
            scenario: scenario.clone(),
            z_m1: *z_m1,
            z_m2: *z_m2,
            z_regret: *z_regret,
            potential: z_m2 - z_m1,
            regret: z_regret - z_m1,
            benefit: z_m2 - z_regret,
        })
        .collect();
    let system_regret = rows
        .iter()
        .map(|r| r.regret)
        .fold(f64::NEG_INFINITY, f64::max);
    RegretReport {
        rows,
        system_regret,
    }
}

impl RegretReport {
    /// Compares the computed potential/regret/benefit columns against a
    /// reference table `(scenario, potential, regret, benefit)` and returns
    /// every cell deviating by more than `tol` (same unit as the report).
    pub fn compare_reference(
        &self,
        reference: &[(String, f64, f64, f64)],
        tol: f64,
    ) -> Vec<ReferenceDeviation> {
        let mut deviations = Vec::new();
        for (scenario, potential, regret, benefit) in reference {
            let Some(row) = self.rows.iter().find(|r| &r.scenario == scenario) else {
                continue;
            };
            for (column, computed, expected) in [
                ("potential", row.potential, *potential),
                ("regret", row.regret, *regret),
                ("benefit", row.benefit, *benefit),
            ] {
                if (computed - expected).abs() > tol {
                    deviations.push(ReferenceDeviation {
                        scenario: scenario.clone(),
                        column,
                        computed,
                        expected,
                    });
                }
            }
        }
        deviations
    }
}

/// Rounds an EUR amount to 0.001 million EUR, the report resolution.
pub fn round_mio(eur: f64) -> f64 {
    (eur / 1.0e6 * 1000.0).round() / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn om_zero_fraction_is_zero() {
        assert_eq!(om_discounted(100.0, 0.0, 0.05, 1, 10), 0.0);
    }

    #[test]
    fn om_hand_computed_two_years() {
        // 2/1.05 + 2/1.05^2 = 3.718821...
        let v = om_discounted(100.0, 0.02, 0.05, 1, 2);
        assert!((v - 3.718821).abs() < 1e-6, "v = {v}");
        let exact = 2.0 / 1.05 + 2.0 / (1.05 * 1.05);
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn om_undiscounted_limit() {
        let v = om_discounted(50.0, 0.03, 0.0, 1, 7);
        assert!((v - 7.0 * 0.03 * 50.0).abs() < 1e-12);
    }

    #[test]
    fn om_empty_range_is_zero() {
        assert_eq!(om_discounted(100.0, 0.02, 0.05, 5, 4), 0.0);
    }

    #[test]
    fn om_monotone_in_tau_and_horizon() {
        let base = om_discounted(100.0, 0.02, 0.05, 1, 10);
        assert!(om_discounted(100.0, 0.02, 0.08, 1, 10) < base);
        assert!(om_discounted(100.0, 0.02, 0.05, 1, 11) > base);
    }

    #[test]
    fn proration_factor_at_defaults() {
        let h = HorizonParams::default();
        let total = scenario_total(0.0, 0.0, 100.0, 0.0, 0.0, 5, 25);
        assert!((total - 80.0).abs() < 1e-12);
        assert!((HorizonFactors::new(&h, OmSchedule::Overlap).proration - 0.8).abs() < 1e-12);
    }

    #[test]
    fn proration_vanishes_when_stages_meet_horizon() {
        // n1 -> n2 limit: period-1 capex is fully residual.
        let total = scenario_total(10.0, 0.0, 100.0, 0.0, 0.0, 24, 25);
        assert!((total - 10.0 - 4.0).abs() < 1e-12);
        let total_limit = scenario_total(10.0, 0.0, 100.0, 0.0, 0.0, 25, 25);
        assert!((total_limit - 10.0).abs() < 1e-12);
    }

    #[test]
    fn no_second_stage_total_is_sum_of_period0_terms() {
        let total = scenario_total(100.0, 8.0, 0.0, 12.0, 0.0, 5, 25);
        assert_eq!(total, 120.0);
    }

    #[test]
    fn om_schedules_differ_by_one_discounted_year() {
        let h = HorizonParams::default();
        let overlap = HorizonFactors::new(&h, OmSchedule::Overlap);
        let no_overlap = HorizonFactors::new(&h, OmSchedule::NoOverlap);
        let year_n1 = h.om_fraction / (1.0 + h.discount_rate).powi(h.years_to_second_stage as i32);
        assert!((overlap.om1 - no_overlap.om1 - year_n1).abs() < 1e-12);
        assert_eq!(overlap.om0, no_overlap.om0);
    }

    #[test]
    fn investment_cost_empty_network() {
        let trends = [Trend {
            slope: 2.0,
            intercept: 100.0,
            q_min: 0.0,
            q_max: 20.0,
        }];
        assert_eq!(investment_cost(&[(None, 7.0)], &trends).unwrap(), 0.0);
    }

    #[test]
    fn investment_cost_formula_instantiation() {
        let trends = [Trend {
            slope: 2.0,
            intercept: 100.0,
            q_min: 0.0,
            q_max: 20.0,
        }];
        let entries = [(Some((0usize, 5.0)), 10.0)];
        assert_eq!(investment_cost(&entries, &trends).unwrap(), 1100.0);
        let doubled = [(Some((0usize, 5.0)), 20.0)];
        assert_eq!(investment_cost(&doubled, &trends).unwrap(), 2200.0);
    }

    #[test]
    fn report_identities() {
        let report = regret_report(&[
            ("S1".into(), 100.0, 100.0, 130.0),
            ("S2".into(), 100.0, 160.0, 120.0),
        ]);
        let s1 = &report.rows[0];
        assert_eq!(s1.potential, 0.0);
        assert_eq!(s1.benefit, -s1.regret);
        let s2 = &report.rows[1];
        assert_eq!(s2.potential, 60.0);
        assert_eq!(s2.regret, 20.0);
        assert_eq!(s2.benefit, 40.0);
        // potential = regret + benefit by construction.
        assert!((s2.potential - s2.regret - s2.benefit).abs() < 1e-12);
        assert_eq!(report.system_regret, 30.0);
    }

    #[test]
    fn reference_comparison_flags_only_real_deviations() {
        let report = regret_report(&[("S2".into(), 100.0, 160.0, 120.0)]);
        let ok = report.compare_reference(&[("S2".into(), 60.0, 20.0, 40.0)], 1e-9);
        assert!(ok.is_empty());
        let off = report.compare_reference(&[("S2".into(), 61.0, 20.0, 40.0)], 1e-3);
        assert_eq!(off.len(), 1);
        assert_eq!(off[0].column, "potential");
    }

    #[test]
    fn breakdown_matches_manual_aggregation() {
        let h = HorizonParams::default();
        let b = CostBreakdown::from_investments(1.0e8, 2.0e7, 5.0e6, &h, OmSchedule::Overlap)
            .with_best(1.2e8);
        let f = HorizonFactors::new(&h, OmSchedule::Overlap);
        assert!((b.o0 - f.om0 * 1.0e8).abs() < 1.0);
        assert!((b.o1 - f.om1 * 1.25e8).abs() < 1.0);
        let manual = 1.0e8 + b.o0 + 0.8 * 2.0e7 + b.o1 + 5.0e6;
        assert!((b.total - manual).abs() < 1.0);
        assert!((b.regret.unwrap() - (b.total - 1.2e8)).abs() < 1.0);
    }

    #[test]
    fn rounding_matches_report_resolution() {
        assert_eq!(round_mio(3_141_325_400.0), 3141.325);
        assert_eq!(round_mio(446_792_499.0), 446.792);
    }
}
