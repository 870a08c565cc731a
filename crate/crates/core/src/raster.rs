//! The penalty raster: a grid of square cells holding cost multipliers.
//!
//! Cell `(col, row)` has its center at `origin + (col + 0.5, row + 0.5) *
//! cell_size`, with row 0 at the southern edge. Rasters persist as ESRI
//! ASCII grids (plain text, header of dimensions, corner and cell size),
//! which keeps fixtures reproducible without any GIS dependency; note the
//! file stores rows north to south.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("cell ({0}, {1}) outside the grid")]
    OutOfBounds(u32, u32),
    #[error("multiplier at cell ({col}, {row}) is {value}, must be finite and positive")]
    InvalidMultiplier { col: u32, row: u32, value: f64 },
    #[error("malformed ascii grid: {0}")]
    Parse(String),
}

/// Geometry of the raster grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: u32,
    pub height: u32,
    /// Side length of a cell in km.
    pub cell_size_km: f64,
    /// Coordinates of the lower-left (south-west) grid corner.
    pub origin: (f64, f64),
    /// Free-form projection tag carried through to exports.
    pub projection: String,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), RasterError> {
        if self.width == 0 || self.height == 0 {
            return Err(RasterError::InvalidSpec(format!(
                "grid must be non-empty, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.cell_size_km > 0.0 && self.cell_size_km.is_finite()) {
            return Err(RasterError::InvalidSpec(format!(
                "cell size must be positive, got {}",
                self.cell_size_km
            )));
        }
        Ok(())
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            width: 1,
            height: 1,
            cell_size_km: 1.5,
            origin: (0.0, 0.0),
            projection: "synthetic-km".into(),
        }
    }
}

/// A grid cell address: column (west to east), row (south to north).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl Cell {
    pub fn new(col: u32, row: u32) -> Self {
        Self { row, col }
    }
}

/// Immutable penalty raster; every cell holds a positive finite multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMap {
    spec: GridSpec,
    values: Vec<f64>,
}

impl RasterMap {
    /// A raster with every multiplier set to 1.
    pub fn uniform(spec: GridSpec) -> Result<Self, RasterError> {
        spec.validate()?;
        let values = vec![1.0; spec.width as usize * spec.height as usize];
        Ok(Self { spec, values })
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self, RasterError> {
        spec.validate()?;
        if values.len() != spec.width as usize * spec.height as usize {
            return Err(RasterError::InvalidSpec(format!(
                "expected {} values, got {}",
                spec.width as usize * spec.height as usize,
                values.len()
            )));
        }
        let raster = Self { spec, values };
        raster.validate_multipliers()?;
        Ok(raster)
    }

    pub fn validate_multipliers(&self) -> Result<(), RasterError> {
        for row in 0..self.spec.height {
            for col in 0..self.spec.width {
                let value = self.values[self.index(Cell::new(col, row))];
                if !(value > 0.0 && value.is_finite()) {
                    return Err(RasterError::InvalidMultiplier { col, row, value });
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn width(&self) -> u32 {
        self.spec.width
    }

    pub fn height(&self) -> u32 {
        self.spec.height
    }

    pub fn cell_size_km(&self) -> f64 {
        self.spec.cell_size_km
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.col < self.spec.width && cell.row < self.spec.height
    }

    fn index(&self, cell: Cell) -> usize {
        cell.row as usize * self.spec.width as usize + cell.col as usize
    }

    pub fn multiplier(&self, cell: Cell) -> f64 {
        self.values[self.index(cell)]
    }

    pub(crate) fn scale_multiplier(&mut self, cell: Cell, factor: f64) {
        let idx = self.index(cell);
        self.values[idx] *= factor;
    }

    /// The cell containing coordinate `(x, y)`, if inside the grid. Points on
    /// the east/north boundary snap inward.
    pub fn snap_point(&self, x: f64, y: f64) -> Option<Cell> {
        let cs = self.spec.cell_size_km;
        let fx = (x - self.spec.origin.0) / cs;
        let fy = (y - self.spec.origin.1) / cs;
        if fx < 0.0 || fy < 0.0 || fx > self.spec.width as f64 || fy > self.spec.height as f64 {
            return None;
        }
        let col = (fx.floor() as u32).min(self.spec.width - 1);
        let row = (fy.floor() as u32).min(self.spec.height - 1);
        Some(Cell::new(col, row))
    }

    /// Coordinates of a cell's center.
    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        let cs = self.spec.cell_size_km;
        (
            self.spec.origin.0 + (cell.col as f64 + 0.5) * cs,
            self.spec.origin.1 + (cell.row as f64 + 0.5) * cs,
        )
    }

    /// Serializes the raster as an ESRI ASCII grid.
    pub fn to_ascii_grid(&self) -> String {
        let mut out = String::new();
        let s = &self.spec;
        writeln!(out, "ncols {}", s.width).unwrap();
        writeln!(out, "nrows {}", s.height).unwrap();
        writeln!(out, "xllcorner {}", s.origin.0).unwrap();
        writeln!(out, "yllcorner {}", s.origin.1).unwrap();
        writeln!(out, "cellsize {}", s.cell_size_km).unwrap();
        writeln!(out, "NODATA_value -9999").unwrap();
        for row in (0..s.height).rev() {
            let line: Vec<String> = (0..s.width)
                .map(|col| format!("{}", self.multiplier(Cell::new(col, row))))
                .collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }

    /// Parses an ESRI ASCII grid; `projection` is metadata the format does
    /// not carry.
    pub fn from_ascii_grid(text: &str, projection: &str) -> Result<Self, RasterError> {
        let (spec, values) = parse_ascii_grid(text, projection)?;
        Self::from_values(spec, values)
    }
}

/// Parses the ESRI ASCII grid header and the row-major (south-up) values.
/// NODATA cells come back as NaN; callers decide what that means.
pub fn parse_ascii_grid(text: &str, projection: &str) -> Result<(GridSpec, Vec<f64>), RasterError> {
    let mut tokens = text.split_whitespace();
    let mut header = std::collections::BTreeMap::new();
    let first_value: f64;
    loop {
        let Some(tok) = tokens.next() else {
            return Err(RasterError::Parse("missing grid values".into()));
        };
        if let Ok(v) = tok.parse::<f64>() {
            first_value = v;
            break;
        }
        let key = tok.to_ascii_lowercase();
        let value: f64 = tokens
            .next()
            .ok_or_else(|| RasterError::Parse(format!("header key {key} without value")))?
            .parse()
            .map_err(|_| RasterError::Parse(format!("non-numeric value for {key}")))?;
        header.insert(key, value);
    }
    let fetch = |key: &str| {
        header
            .get(key)
            .copied()
            .ok_or_else(|| RasterError::Parse(format!("missing header field {key}")))
    };
    let width = fetch("ncols")? as u32;
    let height = fetch("nrows")? as u32;
    let spec = GridSpec {
        width,
        height,
        cell_size_km: fetch("cellsize")?,
        origin: (fetch("xllcorner")?, fetch("yllcorner")?),
        projection: projection.to_string(),
    };
    spec.validate()?;
    let nodata = header.get("nodata_value").copied().unwrap_or(-9999.0);
    let mut file_order = Vec::with_capacity(width as usize * height as usize);
    file_order.push(first_value);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|_| RasterError::Parse(format!("non-numeric grid value {tok}")))?;
        file_order.push(v);
    }
    if file_order.len() != width as usize * height as usize {
        return Err(RasterError::Parse(format!(
            "expected {} values, found {}",
            width as usize * height as usize,
            file_order.len()
        )));
    }
    // File rows run north to south; flip into south-up storage.
    let mut values = vec![0.0; file_order.len()];
    for file_row in 0..height as usize {
        let row = height as usize - 1 - file_row;
        for col in 0..width as usize {
            let v = file_order[file_row * width as usize + col];
            values[row * width as usize + col] = if v == nodata { f64::NAN } else { v };
        }
    }
    Ok((spec, values))
}
