//! Piecewise-linear approximation of the pipeline cost curve.
//!
//! A trend is one secant segment of the exact concave unit-cost curve: a
//! slope in EUR/((Mt/a)*km), an intercept in EUR/km and the flow window it is
//! valid for. Because the curve is concave and every segment is a chord with
//! both endpoints on the curve, the approximation never overestimates.
//! Breakpoints are placed by greedy refinement: the segment with the largest
//! relative deviation is split at the flow where that deviation peaks, until
//! either the requested segment count is used up or the tolerance is met.

use crate::hydraulics::{unit_cost_from_flow, CostParams, HydraulicParams, HydraulicsError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Samples per segment used when scanning for the worst relative deviation.
const ERROR_SCAN_SAMPLES: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum TrendError {
    #[error("trend fitting needs a positive tolerance, got {0}")]
    BadTolerance(f64),
    #[error("trend fitting needs k >= 1 segments, got {0}")]
    BadSegmentCount(usize),
    #[error("trend fitting needs a positive flow ceiling, got {0}")]
    BadFlowCeiling(f64),
    #[error("hydraulics: {0}")]
    Hydraulics(#[from] HydraulicsError),
    #[error("flow {flow} outside trend window [{min}, {max}]")]
    FlowOutsideWindow { flow: f64, min: f64, max: f64 },
    #[error("flow {0} > 0 on an arc without a built trend")]
    FlowWithoutBuild(f64),
}

/// One linear piece of the cost approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    /// Slope in EUR per (Mt/a * km).
    pub slope: f64,
    /// Intercept in EUR per km.
    pub intercept: f64,
    /// Lower flow bound in Mt/a (inclusive).
    pub q_min: f64,
    /// Upper flow bound in Mt/a (inclusive).
    pub q_max: f64,
}

impl Trend {
    /// Approximated unit cost in EUR/km at `flow_mta`.
    pub fn unit_cost(&self, flow_mta: f64) -> f64 {
        self.slope * flow_mta + self.intercept
    }
}

/// Result of a trend fit: the segments plus the deviation actually achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub trends: Vec<Trend>,
    /// Largest relative deviation from the exact curve over the fitted range.
    pub max_rel_error: f64,
    /// Whether `max_rel_error <= tol` was reached within the segment budget.
    pub converged: bool,
}

impl TrendFit {
    /// The trend whose window contains `flow_mta`, if any.
    pub fn trend_for_flow(&self, flow_mta: f64) -> Option<&Trend> {
        self.trends
            .iter()
            .find(|t| flow_mta >= t.q_min - 1e-12 && flow_mta <= t.q_max + 1e-12)
    }
}

fn chord(cost: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Trend {
    let (c_lo, c_hi) = (cost(lo), cost(hi));
    let slope = (c_hi - c_lo) / (hi - lo);
    Trend {
        slope,
        intercept: c_lo - slope * lo,
        q_min: lo,
        q_max: hi,
    }
}

/// Worst relative deviation of the chord over `[lo, hi]` and where it occurs.
fn worst_deviation(cost: &dyn Fn(f64) -> f64, seg: &Trend) -> (f64, f64) {
    let (lo, hi) = (seg.q_min, seg.q_max);
    let mut worst = (0.0_f64, 0.5 * (lo + hi));
    for i in 1..ERROR_SCAN_SAMPLES {
        let f = lo + (hi - lo) * i as f64 / ERROR_SCAN_SAMPLES as f64;
        let exact = cost(f);
        let rel = (exact - seg.unit_cost(f)).abs() / exact;
        if rel > worst.0 {
            worst = (rel, f);
        }
    }
    worst
}

/// Fits `k` secant segments to the exact unit-cost curve over `[0, f_max]`.
///
/// Returns the best fit found; `converged` reports whether the tolerance was
/// met. The windows tile `[0, f_max]` without gaps and neighbouring segments
/// share their breakpoint value exactly.
pub fn fit_trends(
    cp: &CostParams,
    h: &HydraulicParams,
    f_max: f64,
    k: usize,
    tol: f64,
) -> Result<TrendFit, TrendError> {
    if !(tol > 0.0) {
        return Err(TrendError::BadTolerance(tol));
    }
    if k < 1 {
        return Err(TrendError::BadSegmentCount(k));
    }
    if !(f_max > 0.0 && f_max.is_finite()) {
        return Err(TrendError::BadFlowCeiling(f_max));
    }
    cp.validate()?;
    h.validate()?;
    let cost = |f: f64| unit_cost_from_flow(f, h, cp).expect("non-negative flow");

    let mut segments = vec![chord(&cost, 0.0, f_max)];
    loop {
        let deviations: Vec<(f64, f64)> = segments
            .iter()
            .map(|seg| worst_deviation(&cost, seg))
            .collect();
        let (worst_idx, &(worst_rel, split_at)) = deviations
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .expect("at least one segment");
        if worst_rel <= tol || segments.len() >= k {
            return Ok(TrendFit {
                trends: segments,
                max_rel_error: worst_rel,
                converged: worst_rel <= tol,
            });
        }
        let seg = segments[worst_idx];
        segments.splice(
            worst_idx..=worst_idx,
            [
                chord(&cost, seg.q_min, split_at),
                chord(&cost, split_at, seg.q_max),
            ],
        );
    }
}

/// Capital cost in EUR of one arc: `(slope * flow + intercept * built) * length`.
///
/// `built` is the build indicator of the trend on this arc; a positive flow
/// without a build is a consistency error, and a built flow must lie inside
/// the trend window.
pub fn arc_capex(
    flow_mta: f64,
    built: bool,
    trend: &Trend,
    length_km: f64,
) -> Result<f64, TrendError> {
    if !built {
        if flow_mta != 0.0 {
            return Err(TrendError::FlowWithoutBuild(flow_mta));
        }
        return Ok(0.0);
    }
    if flow_mta < trend.q_min - 1e-9 || flow_mta > trend.q_max + 1e-9 {
        return Err(TrendError::FlowOutsideWindow {
            flow: flow_mta,
            min: trend.q_min,
            max: trend.q_max,
        });
    }
    Ok((trend.slope * flow_mta + trend.intercept) * length_km)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> (HydraulicParams, CostParams) {
        (HydraulicParams::default(), CostParams::default())
    }

    #[test]
    fn single_trend_is_the_full_chord() {
        let (h, cp) = defaults();
        let fit = fit_trends(&cp, &h, 20.0, 1, 0.5).unwrap();
        assert_eq!(fit.trends.len(), 1);
        let t = fit.trends[0];
        assert_eq!(t.q_min, 0.0);
        assert_eq!(t.q_max, 20.0);
        let exact0 = unit_cost_from_flow(0.0, &h, &cp).unwrap();
        let exact20 = unit_cost_from_flow(20.0, &h, &cp).unwrap();
        assert!((t.unit_cost(0.0) - exact0).abs() < 1e-9);
        assert!((t.unit_cost(20.0) - exact20).abs() < 1e-9);
    }

    #[test]
    fn three_trends_underestimate_everywhere() {
        let (h, cp) = defaults();
        let fit = fit_trends(&cp, &h, 25.0, 3, 1e-6).unwrap();
        assert_eq!(fit.trends.len(), 3);
        for i in 0..=1000 {
            let f = 25.0 * i as f64 / 1000.0;
            let exact = unit_cost_from_flow(f, &h, &cp).unwrap();
            let approx = fit.trend_for_flow(f).unwrap().unit_cost(f);
            assert!(
                approx <= exact + 1e-6 * exact,
                "chord above curve at {f}: {approx} > {exact}"
            );
        }
    }

    #[test]
    fn breakpoints_are_continuous_and_tiling() {
        let (h, cp) = defaults();
        let fit = fit_trends(&cp, &h, 25.0, 3, 0.02).unwrap();
        assert_eq!(fit.trends[0].q_min, 0.0);
        assert_eq!(fit.trends.last().unwrap().q_max, 25.0);
        for w in fit.trends.windows(2) {
            assert_eq!(w[0].q_max, w[1].q_min, "windows must tile");
            let at = w[0].q_max;
            assert!(
                (w[0].unit_cost(at) - w[1].unit_cost(at)).abs() < 1e-6,
                "neighbouring segments disagree at their shared breakpoint"
            );
        }
    }

    #[test]
    fn default_tolerance_reached_with_three_trends() {
        let (h, cp) = defaults();
        let fit = fit_trends(&cp, &h, 25.0, 3, 0.02).unwrap();
        assert!(fit.converged, "achieved error {}", fit.max_rel_error);
        assert!(fit.max_rel_error <= 0.02);
    }

    #[test]
    fn unreachable_tolerance_reports_best_effort() {
        let (h, cp) = defaults();
        let fit = fit_trends(&cp, &h, 25.0, 1, 1e-9).unwrap();
        assert!(!fit.converged);
        assert!(fit.max_rel_error > 1e-9);
        assert_eq!(fit.trends.len(), 1);
    }

    #[test]
    fn bad_parameters_rejected() {
        let (h, cp) = defaults();
        assert!(matches!(
            fit_trends(&cp, &h, 25.0, 3, 0.0),
            Err(TrendError::BadTolerance(_))
        ));
        assert!(matches!(
            fit_trends(&cp, &h, 25.0, 0, 0.02),
            Err(TrendError::BadSegmentCount(0))
        ));
        assert!(matches!(
            fit_trends(&cp, &h, 0.0, 3, 0.02),
            Err(TrendError::BadFlowCeiling(_))
        ));
    }

    #[test]
    fn capex_formula_instantiation() {
        let t = Trend {
            slope: 2.0,
            intercept: 100.0,
            q_min: 1.0,
            q_max: 20.0,
        };
        assert_eq!(arc_capex(0.0, false, &t, 7.0).unwrap(), 0.0);
        assert_eq!(arc_capex(1.0, true, &t, 1.0).unwrap(), 102.0);
        let one_km = arc_capex(5.0, true, &t, 1.0).unwrap();
        let two_km = arc_capex(5.0, true, &t, 2.0).unwrap();
        assert_eq!(two_km, 2.0 * one_km);
    }

    #[test]
    fn capex_consistency_errors() {
        let t = Trend {
            slope: 2.0,
            intercept: 100.0,
            q_min: 1.0,
            q_max: 20.0,
        };
        assert!(matches!(
            arc_capex(3.0, false, &t, 1.0),
            Err(TrendError::FlowWithoutBuild(_))
        ));
        assert!(matches!(
            arc_capex(25.0, true, &t, 1.0),
            Err(TrendError::FlowOutsideWindow { .. })
        ));
    }
}
