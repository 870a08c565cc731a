//! Geodata layers and their composition into the penalty raster.
//!
//! A layer either paints a constant factor onto the cells its geometry
//! covers (pipelines, roads, waters, protected areas) or derives a per-cell
//! factor from a value grid (population density bands, terrain slope).
//! Factors of different layers multiply; cells no layer touches keep 1.

use crate::raster::{parse_ascii_grid, Cell, GridSpec, RasterMap, RasterError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("layer {kind:?}: {message}")]
    InvalidLayer { kind: LayerKind, message: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("layer file {path}: {message}")]
    File { path: String, message: String },
}

/// The geographic criteria with penalty factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    PopulationDensityBand,
    PreexistingPipeline,
    Railroad,
    Motorway,
    Water,
    CddaProtected,
    NationalPark,
    Slope,
}

impl LayerKind {
    /// Default factor of geometry-based layers. Value-grid layers (population
    /// bands, slope) derive their factor per cell instead.
    pub fn default_factor(self) -> Option<f64> {
        match self {
            LayerKind::PreexistingPipeline => Some(0.25),
            LayerKind::Railroad => Some(3.0),
            LayerKind::Motorway => Some(3.0),
            LayerKind::Water => Some(10.0),
            LayerKind::CddaProtected => Some(10.0),
            LayerKind::NationalPark => Some(30.0),
            LayerKind::PopulationDensityBand | LayerKind::Slope => None,
        }
    }
}

/// Factor for a population density in people per km^2.
pub fn population_band_factor(density: f64) -> f64 {
    match density {
        d if d < 250.0 => 1.0,
        d if d < 500.0 => 4.0,
        d if d < 2000.0 => 9.0,
        d if d < 4000.0 => 16.0,
        d if d < 8000.0 => 25.0,
        _ => 36.0,
    }
}

/// Factor for a terrain slope in degrees, mapping [0, 90] linearly onto
/// [1, 20].
pub fn slope_factor(degrees: f64) -> Result<f64, String> {
    if !(0.0..=90.0).contains(&degrees) || !degrees.is_finite() {
        return Err(format!("slope {degrees} outside [0, 90] degrees"));
    }
    Ok(1.0 + 19.0 * degrees / 90.0)
}

/// Per-cell values for grid-driven layers, south-up row-major like the raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueGrid {
    pub width: u32,
    pub height: u32,
    /// NaN marks no-data cells, which the layer leaves untouched.
    pub values: Vec<f64>,
}

/// One geodata layer: a kind plus any mix of geometry carriers.
///
/// Coordinates are in the grid's projection; `cells` and `rects` address
/// cells directly, which is what synthetic test configurations use.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoLayer {
    pub kind: Option<LayerKind>,
    /// Overrides the kind's default factor for geometry-based layers.
    #[serde(default)]
    pub factor: Option<f64>,
    /// Density value assumed for geometry-covered cells of a population layer.
    #[serde(default)]
    pub band_value: Option<f64>,
    /// Directly addressed cells `(col, row)`.
    #[serde(default)]
    pub cells: Vec<(u32, u32)>,
    /// Inclusive cell rectangles `(col0, row0, col1, row1)`.
    #[serde(default)]
    pub rects: Vec<(u32, u32, u32, u32)>,
    /// Polylines in map coordinates, rasterized by grid traversal.
    #[serde(default)]
    pub polylines: Vec<Vec<(f64, f64)>>,
    /// Polygon rings in map coordinates; cells whose center is inside count.
    #[serde(default)]
    pub polygons: Vec<Vec<(f64, f64)>>,
    /// Per-cell values (slope degrees or population density).
    #[serde(default)]
    pub grid: Option<ValueGrid>,
    /// ESRI ASCII grid file with per-cell values, resolved by the loader.
    #[serde(default)]
    pub grid_path: Option<String>,
    /// GeoJSON file with geometries, resolved by the loader.
    #[serde(default)]
    pub geojson_path: Option<String>,
}

impl GeoLayer {
    fn kind(&self) -> Result<LayerKind, LayerError> {
        self.kind.ok_or(LayerError::InvalidLayer {
            kind: LayerKind::Water,
            message: "layer is missing its kind".into(),
        })
    }

    fn err(&self, message: impl Into<String>) -> LayerError {
        LayerError::InvalidLayer {
            kind: self.kind.unwrap_or(LayerKind::Water),
            message: message.into(),
        }
    }

    /// Factor painted onto geometry-covered cells.
    fn geometry_factor(&self) -> Result<f64, LayerError> {
        let kind = self.kind()?;
        if let Some(f) = self.factor {
            return Ok(f);
        }
        match kind {
            LayerKind::PopulationDensityBand => {
                let density = self
                    .band_value
                    .ok_or_else(|| self.err("population geometry needs band_value or factor"))?;
                Ok(population_band_factor(density))
            }
            LayerKind::Slope => {
                let degrees = self
                    .band_value
                    .ok_or_else(|| self.err("slope geometry needs band_value or factor"))?;
                slope_factor(degrees).map_err(|m| self.err(m))
            }
            other => other
                .default_factor()
                .ok_or_else(|| self.err("no default factor for this kind")),
        }
    }

    /// The set of cells this layer's geometries cover.
    fn covered_cells(&self, spec: &GridSpec) -> Result<BTreeSet<Cell>, LayerError> {
        let mut covered = BTreeSet::new();
        for &(col, row) in &self.cells {
            if col >= spec.width || row >= spec.height {
                return Err(self.err(format!("cell ({col}, {row}) outside the grid")));
            }
            covered.insert(Cell::new(col, row));
        }
        for &(c0, r0, c1, r1) in &self.rects {
            if c1 >= spec.width || r1 >= spec.height || c0 > c1 || r0 > r1 {
                return Err(self.err(format!("rect ({c0},{r0},{c1},{r1}) outside the grid")));
            }
            for row in r0..=r1 {
                for col in c0..=c1 {
                    covered.insert(Cell::new(col, row));
                }
            }
        }
        for line in &self.polylines {
            for pair in line.windows(2) {
                traverse_segment(spec, pair[0], pair[1], &mut covered);
            }
        }
        for ring in &self.polygons {
            cover_polygon(spec, ring, &mut covered);
        }
        Ok(covered)
    }
}

/// Composes the layers into a penalty raster over the given grid.
///
/// Each layer contributes its factor at most once per cell; factors of
/// different layers multiply. Grid-driven layers (population, slope) derive
/// the factor from the cell value.
pub fn compose_raster(layers: &[GeoLayer], spec: &GridSpec) -> Result<RasterMap, LayerError> {
    let mut raster = RasterMap::uniform(spec.clone())?;
    for layer in layers {
        let kind = layer.kind()?;
        if let Some(grid) = &layer.grid {
            if grid.width != spec.width || grid.height != spec.height {
                return Err(layer.err(format!(
                    "value grid is {}x{}, raster is {}x{}",
                    grid.width, grid.height, spec.width, spec.height
                )));
            }
            for row in 0..spec.height {
                for col in 0..spec.width {
                    let value = grid.values[(row * spec.width + col) as usize];
                    if value.is_nan() {
                        continue;
                    }
                    let factor = match kind {
                        LayerKind::PopulationDensityBand => population_band_factor(value),
                        LayerKind::Slope => slope_factor(value).map_err(|m| layer.err(m))?,
                        _ => {
                            return Err(layer
                                .err("value grids are only valid for population and slope layers"))
                        }
                    };
                    raster.scale_multiplier(Cell::new(col, row), factor);
                }
            }
        }
        let covered = layer.covered_cells(spec)?;
        if covered.is_empty() {
            continue;
        }
        let factor = layer.geometry_factor()?;
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(layer.err(format!("factor {factor} must be finite and positive")));
        }
        for cell in covered {
            raster.scale_multiplier(cell, factor);
        }
    }
    raster.validate_multipliers()?;
    Ok(raster)
}

/// Loads a `ValueGrid` from ESRI ASCII grid text (NODATA becomes NaN).
pub fn value_grid_from_ascii(text: &str) -> Result<ValueGrid, LayerError> {
    let (spec, values) = parse_ascii_grid(text, "")?;
    Ok(ValueGrid {
        width: spec.width,
        height: spec.height,
        values,
    })
}

/// Marks every cell a segment passes through (Amanatides-Woo traversal).
fn traverse_segment(spec: &GridSpec, from: (f64, f64), to: (f64, f64), out: &mut BTreeSet<Cell>) {
    let cs = spec.cell_size_km;
    let to_grid = |p: (f64, f64)| ((p.0 - spec.origin.0) / cs, (p.1 - spec.origin.1) / cs);
    let (x0, y0) = to_grid(from);
    let (x1, y1) = to_grid(to);
    let clamp_cell = |x: f64, y: f64| -> (i64, i64) {
        (
            (x.floor() as i64).clamp(0, spec.width as i64 - 1),
            (y.floor() as i64).clamp(0, spec.height as i64 - 1),
        )
    };
    let (mut cx, mut cy) = (x0.floor() as i64, y0.floor() as i64);
    let (ex, ey) = (x1.floor() as i64, y1.floor() as i64);
    let dx = x1 - x0;
    let dy = y1 - y0;
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let mut t_max_x = if dx != 0.0 {
        let next = if dx > 0.0 {
            cx as f64 + 1.0
        } else {
            cx as f64
        };
        (next - x0) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy != 0.0 {
        let next = if dy > 0.0 {
            cy as f64 + 1.0
        } else {
            cy as f64
        };
        (next - y0) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 {
        (1.0 / dx).abs()
    } else {
        f64::INFINITY
    };
    let t_delta_y = if dy != 0.0 {
        (1.0 / dy).abs()
    } else {
        f64::INFINITY
    };
    let mut push = |cx: i64, cy: i64| {
        if cx >= 0 && cy >= 0 && cx < spec.width as i64 && cy < spec.height as i64 {
            out.insert(Cell::new(cx as u32, cy as u32));
        }
    };
    push(cx, cy);
    let max_steps = (spec.width + spec.height) as i64 * 2 + 4;
    let mut steps = 0;
    while (cx, cy) != (ex, ey) && steps < max_steps {
        if t_max_x < t_max_y {
            t_max_x += t_delta_x;
            cx += step_x;
        } else {
            t_max_y += t_delta_y;
            cy += step_y;
        }
        push(cx, cy);
        steps += 1;
    }
    let _ = clamp_cell;
}

/// Marks every cell whose center lies inside the ring (even-odd rule).
fn cover_polygon(spec: &GridSpec, ring: &[(f64, f64)], out: &mut BTreeSet<Cell>) {
    if ring.len() < 3 {
        return;
    }
    let cs = spec.cell_size_km;
    for row in 0..spec.height {
        for col in 0..spec.width {
            let x = spec.origin.0 + (col as f64 + 0.5) * cs;
            let y = spec.origin.1 + (row as f64 + 0.5) * cs;
            if point_in_ring(x, y, ring) {
                out.insert(Cell::new(col, row));
            }
        }
    }
}

fn point_in_ring(x: f64, y: f64, ring: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}
