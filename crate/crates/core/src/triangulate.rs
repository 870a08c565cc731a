//! Delaunay triangulation of node coordinates, with degenerate fallbacks.
//!
//! Fewer than three points, or points that are all collinear, cannot be
//! triangulated; those cases fall back to the chain of nearest-neighbour
//! links along the sorted point order. Duplicate coordinates are a
//! precondition violation: co-located nodes must be merged beforehand.

use delaunator::{triangulate as delaunay, Point};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TriangulateError {
    #[error("triangulation needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("duplicate coordinates at index {0} and {1}; merge co-located nodes first")]
    DuplicatePoints(usize, usize),
}

/// Undirected point-index pairs of the Delaunay triangulation (or of the
/// fallback chain for degenerate inputs), sorted and deduplicated.
pub fn triangulate(points: &[(f64, f64)]) -> Result<Vec<(usize, usize)>, TriangulateError> {
    if points.len() < 2 {
        return Err(TriangulateError::TooFewPoints(points.len()));
    }
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i] == points[j] {
                return Err(TriangulateError::DuplicatePoints(i, j));
            }
        }
    }
    if points.len() >= 3 {
        let input: Vec<Point> = points.iter().map(|&(x, y)| Point { x, y }).collect();
        let triangulation = delaunay(&input);
        if !triangulation.triangles.is_empty() {
            let mut edges = BTreeSet::new();
            for tri in triangulation.triangles.chunks(3) {
                for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
            return Ok(edges.into_iter().collect());
        }
    }
    Ok(nearest_neighbor_chain(points))
}

/// Chain of links along the lexicographically sorted point order; for
/// collinear inputs this is exactly the nearest-neighbour chain.
fn nearest_neighbor_chain(points: &[(f64, f64)]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    let mut edges: Vec<(usize, usize)> = order
        .windows(2)
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
        .collect();
    edges.sort();
    edges
}
