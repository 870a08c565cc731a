//! Least-cost routing through the penalty raster.
//!
//! Cells are 8-connected. A step between neighbouring cells costs the
//! arithmetic mean of the two cell multipliers times the step length
//! (`cell_size` orthogonally, `cell_size * sqrt(2)` diagonally), so the
//! penalty converges to the line integral of the penalty field. Among all
//! minimum-penalty paths the lexicographically smallest cell sequence is
//! returned, which makes routing reproducible bit for bit.

use crate::raster::{Cell, RasterMap};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("cell ({0}, {1}) outside the grid")]
    OutsideGrid(u32, u32),
    #[error("no route between ({0}, {1}) and ({2}, {3})")]
    NoRoute(u32, u32, u32, u32),
}

/// A routed path: the ordered cells, the accumulated penalty and the
/// geographic length in km.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteResult {
    pub cells: Vec<Cell>,
    pub penalty: f64,
    pub length_km: f64,
}

const NEIGHBOR_OFFSETS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

fn neighbors(raster: &RasterMap, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
    NEIGHBOR_OFFSETS.iter().filter_map(move |&(dc, dr)| {
        let col = cell.col as i64 + dc;
        let row = cell.row as i64 + dr;
        if col >= 0 && row >= 0 && col < raster.width() as i64 && row < raster.height() as i64 {
            Some(Cell::new(col as u32, row as u32))
        } else {
            None
        }
    })
}

/// Penalty of one step `u -> v`.
pub fn step_penalty(raster: &RasterMap, u: Cell, v: Cell) -> f64 {
    let mean = 0.5 * (raster.multiplier(u) + raster.multiplier(v));
    mean * step_length_km(raster, u, v)
}

/// Geographic length of one step in km.
pub fn step_length_km(raster: &RasterMap, u: Cell, v: Cell) -> f64 {
    let diagonal = u.col != v.col && u.row != v.row;
    if diagonal {
        raster.cell_size_km() * std::f64::consts::SQRT_2
    } else {
        raster.cell_size_km()
    }
}

/// Penalty of a full cell sequence, summed front to back.
pub fn path_penalty(raster: &RasterMap, cells: &[Cell]) -> f64 {
    cells
        .windows(2)
        .map(|w| step_penalty(raster, w[0], w[1]))
        .sum()
}

/// Geographic length of a full cell sequence in km.
pub fn path_length_km(raster: &RasterMap, cells: &[Cell]) -> f64 {
    cells
        .windows(2)
        .map(|w| step_length_km(raster, w[0], w[1]))
        .sum()
}

fn linear(raster: &RasterMap, cell: Cell) -> usize {
    cell.row as usize * raster.width() as usize + cell.col as usize
}

/// Distance labels from `source` to every cell (Dijkstra; step costs are
/// symmetric, so the same labels serve as distances *to* `source`).
fn distances(raster: &RasterMap, source: Cell) -> Vec<f64> {
    let n = raster.width() as usize * raster.height() as usize;
    let mut dist = vec![f64::INFINITY; n];
    let mut heap: BinaryHeap<Reverse<(OrderedF64, usize)>> = BinaryHeap::new();
    dist[linear(raster, source)] = 0.0;
    heap.push(Reverse((OrderedF64(0.0), linear(raster, source))));
    let width = raster.width() as usize;
    while let Some(Reverse((OrderedF64(d), idx))) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        let cell = Cell::new((idx % width) as u32, (idx / width) as u32);
        for next in neighbors(raster, cell) {
            let nd = d + step_penalty(raster, cell, next);
            let nidx = linear(raster, next);
            if nd < dist[nidx] {
                dist[nidx] = nd;
                heap.push(Reverse((OrderedF64(nd), nidx)));
            }
        }
    }
    dist
}

/// Total orders f64 keys for the heap; penalties are never NaN.
#[derive(PartialEq)]
struct OrderedF64(f64);

impl Eq for OrderedF64 {}

impl PartialOrd for OrderedF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Minimum-penalty 8-connected path between two cells.
///
/// `from == to` yields the empty path. Ties between optimal paths resolve to
/// the lexicographically smallest cell sequence (cells ordered row-major).
pub fn least_cost_path(raster: &RasterMap, from: Cell, to: Cell) -> Result<RouteResult, RouteError> {
    for cell in [from, to] {
        if !raster.contains(cell) {
            return Err(RouteError::OutsideGrid(cell.col, cell.row));
        }
    }
    if from == to {
        return Ok(RouteResult {
            cells: Vec::new(),
            penalty: 0.0,
            length_km: 0.0,
        });
    }
    let dist_from = distances(raster, from);
    let dist_to = distances(raster, to);
    let best = dist_from[linear(raster, to)];
    if !best.is_finite() {
        return Err(RouteError::NoRoute(from.col, from.row, to.col, to.row));
    }
    // Walk the subgraph of optimal steps, always taking the smallest next
    // cell. Step costs are strictly positive, so the remaining distance
    // decreases every step and the walk terminates at the target.
    let eps = 1e-12 * best.max(1.0);
    let mut cells = vec![from];
    let mut current = from;
    let max_steps = raster.width() as usize * raster.height() as usize;
    while current != to {
        let mut chosen: Option<Cell> = None;
        for next in neighbors(raster, current) {
            let through =
                dist_from[linear(raster, current)] + step_penalty(raster, current, next)
                    + dist_to[linear(raster, next)];
            if through <= best + eps {
                chosen = match chosen {
                    Some(c) if c <= next => Some(c),
                    _ => Some(next),
                };
            }
        }
        let next = chosen.expect("an optimal step exists along a finite-distance route");
        cells.push(next);
        current = next;
        if cells.len() > max_steps {
            return Err(RouteError::NoRoute(from.col, from.row, to.col, to.row));
        }
    }
    Ok(RouteResult {
        penalty: path_penalty(raster, &cells),
        length_km: path_length_km(raster, &cells),
        cells,
    })
}
