//! Flow-to-diameter hydraulics and the exact pipeline unit-cost curve.
//!
//! Flows are megatonnes per year (Mt/a) everywhere outside this module and
//! converted to kg/s only for the hydraulic formula. The unit cost is concave
//! and strictly increasing in the flow, which is what the piecewise-linear
//! trend approximation in [`crate::trends`] exploits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds in the 365-day year used for the Mt/a <-> kg/s conversion.
pub const SECONDS_PER_YEAR: f64 = 365.0 * 24.0 * 3600.0;

/// Converts a mass flow in Mt/a into kg/s.
pub fn mta_to_kg_s(flow_mta: f64) -> f64 {
    flow_mta * 1.0e9 / SECONDS_PER_YEAR
}

/// Converts a mass flow in kg/s into Mt/a.
pub fn kg_s_to_mta(flow_kg_s: f64) -> f64 {
    flow_kg_s * SECONDS_PER_YEAR / 1.0e9
}

#[derive(Debug, Error, PartialEq)]
pub enum HydraulicsError {
    #[error("mass flow must be non-negative, got {0}")]
    NegativeFlow(f64),
    #[error("invalid hydraulic parameters: {0}")]
    InvalidParams(String),
}

/// Gas state inside the pipeline: density and design velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydraulicParams {
    /// Gas density in kg/m^3.
    pub density_kg_m3: f64,
    /// Design flow velocity in m/s.
    pub velocity_m_s: f64,
}

impl Default for HydraulicParams {
    fn default() -> Self {
        Self {
            density_kg_m3: 900.0,
            velocity_m_s: 3.0,
        }
    }
}

impl HydraulicParams {
    pub fn validate(&self) -> Result<(), HydraulicsError> {
        if !(self.density_kg_m3 > 0.0 && self.density_kg_m3.is_finite()) {
            return Err(HydraulicsError::InvalidParams(format!(
                "density must be positive, got {}",
                self.density_kg_m3
            )));
        }
        if !(self.velocity_m_s > 0.0 && self.velocity_m_s.is_finite()) {
            return Err(HydraulicsError::InvalidParams(format!(
                "velocity must be positive, got {}",
                self.velocity_m_s
            )));
        }
        Ok(())
    }

    /// The mass flow in kg/s carried by one square meter of cross section,
    /// i.e. the denominator of the diameter formula.
    pub fn flow_per_area(&self) -> f64 {
        self.velocity_m_s * std::f64::consts::PI * 0.25 * self.density_kg_m3
    }
}

/// Quadratic cost coefficients of the per-meter pipe cost curve
/// `c1 * D^2 + c2 * D + c3` with the inner diameter `D` in meters.
///
/// The default values are order-of-magnitude onshore CO2 trunk-line figures
/// escalated to 2022 price levels; they are configuration inputs and nothing
/// in the crate depends on their absolute magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// EUR per meter of pipe per square meter of diameter.
    pub c1: f64,
    /// EUR per meter of pipe per meter of diameter.
    pub c2: f64,
    /// Fixed charge in EUR per meter of pipe.
    pub c3: f64,
    /// Price base year of the coefficients.
    pub cost_year: u32,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            c1: 2800.0,
            c2: 250.0,
            c3: 700.0,
            cost_year: 2022,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), HydraulicsError> {
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(HydraulicsError::InvalidParams(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        if self.c3 <= 0.0 {
            return Err(HydraulicsError::InvalidParams(
                "c3 (fixed charge) must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Inner diameter in meters needed to carry `flow_kg_s` at the given gas state.
pub fn diameter_from_flow(flow_kg_s: f64, h: &HydraulicParams) -> Result<f64, HydraulicsError> {
    if flow_kg_s < 0.0 || flow_kg_s.is_nan() {
        return Err(HydraulicsError::NegativeFlow(flow_kg_s));
    }
    Ok((flow_kg_s / h.flow_per_area()).sqrt())
}

/// Inner diameter in meters for a flow given in Mt/a.
pub fn diameter_from_flow_mta(flow_mta: f64, h: &HydraulicParams) -> Result<f64, HydraulicsError> {
    diameter_from_flow(mta_to_kg_s(flow_mta), h)
}

/// Per-meter pipe cost at diameter `d_m` (meters): `c1*D^2 + c2*D + c3`.
pub fn cost_of_diameter_per_m(d_m: f64, cp: &CostParams) -> f64 {
    cp.c1 * d_m * d_m + cp.c2 * d_m + cp.c3
}

/// Exact unit cost in EUR per meter of pipe for a flow in Mt/a.
pub fn unit_cost_per_m(
    flow_mta: f64,
    h: &HydraulicParams,
    cp: &CostParams,
) -> Result<f64, HydraulicsError> {
    let d = diameter_from_flow_mta(flow_mta, h)?;
    Ok(cost_of_diameter_per_m(d, cp))
}

/// Exact unit cost in EUR per kilometer of pipe for a flow in Mt/a.
///
/// This is the curve the trend approximation is fitted against.
pub fn unit_cost_from_flow(
    flow_mta: f64,
    h: &HydraulicParams,
    cp: &CostParams,
) -> Result<f64, HydraulicsError> {
    Ok(unit_cost_per_m(flow_mta, h, cp)? * 1000.0)
}
