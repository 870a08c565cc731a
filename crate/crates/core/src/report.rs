//! Model-comparison tables: total system costs and
//! potential/regret/benefit, as text and CSV.

use crate::economics::{round_mio, RegretReport};
use std::fmt::Write as _;

/// CSV of per-scenario totals (million EUR, 0.001 resolution):
/// `scenario,z_m1,z_m2,z_regret`.
pub fn system_costs_csv(totals: &[(String, f64, f64, f64)]) -> String {
    let mut out = String::from("scenario,z_m1,z_m2,z_regret\n");
    for (scenario, z_m1, z_m2, z_r) in totals {
        writeln!(
            out,
            "{scenario},{:.3},{:.3},{:.3}",
            round_mio(*z_m1),
            round_mio(*z_m2),
            round_mio(*z_r)
        )
        .unwrap();
    }
    out
}

/// CSV of the comparison report (million EUR):
/// `scenario,potential,regret,benefit`.
pub fn regret_report_csv(report: &RegretReport) -> String {
    let mut out = String::from("scenario,potential,regret,benefit\n");
    for row in &report.rows {
        writeln!(
            out,
            "{},{:.3},{:.3},{:.3}",
            row.scenario,
            round_mio(row.potential),
            round_mio(row.regret),
            round_mio(row.benefit)
        )
        .unwrap();
    }
    out
}

/// Human-readable rendering of both tables.
pub fn render_tables(totals: &[(String, f64, f64, f64)], report: &RegretReport) -> String {
    let mut out = String::new();
    writeln!(out, "Total system costs [Mio EUR]").unwrap();
    writeln!(
        out,
        "{:<12} {:>12} {:>12} {:>12}",
        "scenario", "z_m1", "z_m2", "z_regret"
    )
    .unwrap();
    for (scenario, z_m1, z_m2, z_r) in totals {
        writeln!(
            out,
            "{:<12} {:>12.3} {:>12.3} {:>12.3}",
            scenario,
            round_mio(*z_m1),
            round_mio(*z_m2),
            round_mio(*z_r)
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "Potential savings, regret and benefit [Mio EUR]").unwrap();
    writeln!(
        out,
        "{:<12} {:>12} {:>12} {:>12}",
        "scenario", "potential", "regret", "benefit"
    )
    .unwrap();
    for row in &report.rows {
        writeln!(
            out,
            "{:<12} {:>12.3} {:>12.3} {:>12.3}",
            row.scenario,
            round_mio(row.potential),
            round_mio(row.regret),
            round_mio(row.benefit)
        )
        .unwrap();
    }
    writeln!(
        out,
        "\nsystem regret (max over scenarios): {:.3} Mio EUR",
        round_mio(report.system_regret)
    )
    .unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economics::regret_report;

    fn sample() -> Vec<(String, f64, f64, f64)> {
        vec![
            ("S1".into(), 3_141.325e6, 3_141.325e6, 3_497.485e6),
            ("S2".into(), 3_979.308e6, 4_997.963e6, 4_426.101e6),
        ]
    }

    #[test]
    fn csv_row_count_matches_scenarios() {
        let totals = sample();
        let report = regret_report(&totals);
        let csv = system_costs_csv(&totals);
        assert_eq!(csv.lines().count(), 1 + totals.len());
        let csv = regret_report_csv(&report);
        assert_eq!(csv.lines().count(), 1 + totals.len());
    }

    #[test]
    fn csv_columns_mirror_the_tables() {
        let totals = sample();
        let report = regret_report(&totals);
        let costs = system_costs_csv(&totals);
        assert!(costs.starts_with("scenario,z_m1,z_m2,z_regret\n"));
        assert!(costs.contains("S2,3979.308,4997.963,4426.101"));
        let rr = regret_report_csv(&report);
        assert!(rr.starts_with("scenario,potential,regret,benefit\n"));
        assert!(rr.contains("S2,1018.655,446.793,571.862"));
    }

    #[test]
    fn render_includes_system_regret() {
        let totals = sample();
        let report = regret_report(&totals);
        let text = render_tables(&totals, &report);
        assert!(text.contains("system regret"));
        assert!(text.contains("446.793"));
    }
}
