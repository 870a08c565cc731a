//! Candidate-graph assembly: route union, contraction and arc derivation.
//!
//! Emitters and sinks of every scenario are snapped to raster cells (merging
//! co-located nodes), Delaunay-triangulated, and connected pairwise by
//! least-cost routes. The union of the routes forms an undirected cell
//! graph; interior cells of degree two are contracted away (lengths summed,
//! polylines preserved) and the remainder becomes a directed graph with
//! anti-parallel arc pairs of equal length.

use crate::raster::{Cell, RasterMap};
use crate::route::{least_cost_path, path_length_km, step_length_km};
use crate::scenario::{Scenario, ScenarioSet};
use crate::triangulate::{triangulate, TriangulateError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("node {0} at ({1}, {2}) lies outside the raster")]
    NodeOutsideGrid(String, f64, f64),
    #[error("nodes {0} and {1} share a cell but have different kinds")]
    CoLocatedKindConflict(String, String),
    #[error("no route between {from} and {to}: {source}")]
    NoRoute {
        from: String,
        to: String,
        source: crate::route::RouteError,
    },
    #[error(transparent)]
    Triangulation(#[from] TriangulateError),
    #[error("unknown node id {0}")]
    UnknownNode(String),
}

/// Role of a node in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Emitter,
    Sink,
    Transport,
}

/// An emitter or sink as specified in the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
}

/// A node of the candidate graph. Terminals carry the original node ids they
/// were merged from; demands of merged nodes are the member sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
    pub cell: Option<Cell>,
    pub members: Vec<String>,
}

impl GraphNode {
    /// Period-0 demand of this node under `scenario` (member sum).
    pub fn demand_t0(&self, scenario: &Scenario) -> f64 {
        self.members.iter().map(|m| scenario.demand_t0(m)).sum()
    }

    /// Period-1 demand of this node under `scenario` (member sum).
    pub fn demand_t1(&self, scenario: &Scenario) -> f64 {
        self.members.iter().map(|m| scenario.demand_t1(m)).sum()
    }
}

/// A directed arc with its geographic length and the raster cells it follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateArc {
    pub from: usize,
    pub to: usize,
    pub length_km: f64,
    pub polyline: Vec<Cell>,
}

/// The directed candidate graph all optimization models run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGraph {
    pub nodes: Vec<GraphNode>,
    pub arcs: Vec<CandidateArc>,
    pub cell_size_km: f64,
    /// Lower-left corner of the raster grid the polylines refer to.
    pub origin: (f64, f64),
    pub projection: String,
}

impl CandidateGraph {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Node roster for scenario validation: member ids mapped to their kind.
    pub fn roster(&self) -> BTreeMap<String, NodeKind> {
        let mut roster = BTreeMap::new();
        for node in &self.nodes {
            for member in &node.members {
                roster.insert(member.clone(), node.kind);
            }
        }
        roster
    }

    /// A graph given directly as nodes and undirected edges, for synthetic
    /// instances that skip the raster pipeline.
    pub fn synthetic(
        nodes: &[(&str, NodeKind, f64, f64)],
        edges: &[(&str, &str, f64)],
    ) -> Result<Self, GraphError> {
        let nodes: Vec<GraphNode> = nodes
            .iter()
            .map(|(id, kind, x, y)| GraphNode {
                id: id.to_string(),
                kind: *kind,
                x: *x,
                y: *y,
                cell: None,
                members: vec![id.to_string()],
            })
            .collect();
        let graph_nodes = nodes.clone();
        let index = |id: &str| {
            graph_nodes
                .iter()
                .position(|n| n.id == id)
                .ok_or_else(|| GraphError::UnknownNode(id.to_string()))
        };
        let mut arcs = Vec::new();
        for (a, b, length_km) in edges {
            let (ia, ib) = (index(a)?, index(b)?);
            arcs.push(CandidateArc {
                from: ia,
                to: ib,
                length_km: *length_km,
                polyline: Vec::new(),
            });
            arcs.push(CandidateArc {
                from: ib,
                to: ia,
                length_km: *length_km,
                polyline: Vec::new(),
            });
        }
        Ok(Self {
            nodes,
            arcs,
            cell_size_km: 0.0,
            origin: (0.0, 0.0),
            projection: "synthetic".into(),
        })
    }

    /// Undirected degree of every node (each anti-parallel pair counts once).
    pub fn undirected_degrees(&self) -> Vec<usize> {
        let mut pairs = BTreeSet::new();
        for arc in &self.arcs {
            pairs.insert((arc.from.min(arc.to), arc.from.max(arc.to), key(&arc.polyline)));
        }
        let mut degrees = vec![0usize; self.nodes.len()];
        for (a, b, _) in pairs {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        degrees
    }

    /// Total length of the undirected skeleton in km.
    pub fn total_undirected_length_km(&self) -> f64 {
        self.arcs.iter().map(|a| a.length_km).sum::<f64>() / 2.0
    }
}

fn key(polyline: &[Cell]) -> Vec<(u32, u32)> {
    let fwd: Vec<(u32, u32)> = polyline.iter().map(|c| (c.row, c.col)).collect();
    let mut rev = fwd.clone();
    rev.reverse();
    fwd.min(rev)
}

/// Builds the candidate graph for the union of all scenarios' nodes.
///
/// `specs` must contain every emitter and sink of every scenario; co-located
/// nodes are merged here (their demands sum via [`GraphNode::members`]).
pub fn build_candidate_graph(
    raster: &RasterMap,
    specs: &[NodeSpec],
) -> Result<CandidateGraph, GraphError> {
    if specs.len() < 2 {
        return Err(GraphError::TooFewNodes(specs.len()));
    }
    // Snap to cells and merge co-located nodes (summed demand happens at
    // lookup time through the member list).
    let mut by_cell: BTreeMap<Cell, Vec<&NodeSpec>> = BTreeMap::new();
    for spec in specs {
        let cell = raster
            .snap_point(spec.x, spec.y)
            .ok_or_else(|| GraphError::NodeOutsideGrid(spec.id.clone(), spec.x, spec.y))?;
        by_cell.entry(cell).or_default().push(spec);
    }
    struct Terminal {
        id: String,
        kind: NodeKind,
        cell: Cell,
        members: Vec<String>,
    }
    let mut terminals = Vec::new();
    for (cell, group) in &by_cell {
        let kind = group[0].kind;
        for other in &group[1..] {
            if other.kind != kind {
                return Err(GraphError::CoLocatedKindConflict(
                    group[0].id.clone(),
                    other.id.clone(),
                ));
            }
        }
        let mut members: Vec<String> = group.iter().map(|s| s.id.clone()).collect();
        members.sort();
        terminals.push(Terminal {
            id: members.join("+"),
            kind,
            cell: *cell,
            members,
        });
    }
    terminals.sort_by(|a, b| a.id.cmp(&b.id));

    // Delaunay edges between terminal cell centers, then one least-cost
    // route per edge. Routes only read the shared raster, so they run in
    // parallel.
    let centers: Vec<(f64, f64)> = terminals.iter().map(|t| raster.cell_center(t.cell)).collect();
    let pairs = triangulate(&centers)?;
    let routes: Vec<Result<Vec<Cell>, GraphError>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            least_cost_path(raster, terminals[a].cell, terminals[b].cell)
                .map(|r| r.cells)
                .map_err(|source| GraphError::NoRoute {
                    from: terminals[a].id.clone(),
                    to: terminals[b].id.clone(),
                    source,
                })
        })
        .collect();

    // Union of the routes as an undirected cell graph; shared cells become
    // shared nodes.
    let mut adjacency: BTreeMap<Cell, BTreeSet<Cell>> = BTreeMap::new();
    for route in routes {
        let cells = route?;
        for w in cells.windows(2) {
            adjacency.entry(w[0]).or_default().insert(w[1]);
            adjacency.entry(w[1]).or_default().insert(w[0]);
        }
    }
    for t in &terminals {
        adjacency.entry(t.cell).or_default();
    }

    let terminal_cells: BTreeMap<Cell, usize> = terminals
        .iter()
        .enumerate()
        .map(|(i, t)| (t.cell, i))
        .collect();
    let kept: BTreeSet<Cell> = adjacency
        .iter()
        .filter(|(cell, neighbors)| neighbors.len() != 2 || terminal_cells.contains_key(cell))
        .map(|(cell, _)| *cell)
        .collect();

    // Contract: walk chains of degree-2 cells between kept cells.
    let mut visited: BTreeSet<(Cell, Cell)> = BTreeSet::new();
    let norm = |a: Cell, b: Cell| (a.min(b), a.max(b));
    let mut chains: Vec<(Cell, Cell, Vec<Cell>)> = Vec::new();
    for &start in &kept {
        let neighbors: Vec<Cell> = adjacency[&start].iter().copied().collect();
        for first in neighbors {
            if visited.contains(&norm(start, first)) {
                continue;
            }
            let mut polyline = vec![start, first];
            visited.insert(norm(start, first));
            let (mut prev, mut current) = (start, first);
            while !kept.contains(&current) {
                let next = adjacency[&current]
                    .iter()
                    .copied()
                    .find(|&n| n != prev)
                    .expect("degree-2 chains continue until a kept cell");
                visited.insert(norm(current, next));
                polyline.push(next);
                prev = current;
                current = next;
            }
            if start == current {
                // A loop back to its only kept cell adds no routing value.
                continue;
            }
            chains.push((start, current, polyline));
        }
    }
    debug_assert_eq!(
        visited.len(),
        adjacency
            .values()
            .map(|n| n.len())
            .sum::<usize>()
            / 2,
        "every union edge must be contracted into some chain"
    );

    // Final node list: merged terminals first, then transport cells.
    let mut nodes: Vec<GraphNode> = terminals
        .iter()
        .map(|t| {
            let (x, y) = raster.cell_center(t.cell);
            GraphNode {
                id: t.id.clone(),
                kind: t.kind,
                x,
                y,
                cell: Some(t.cell),
                members: t.members.clone(),
            }
        })
        .collect();
    let mut cell_to_node: BTreeMap<Cell, usize> =
        terminals.iter().enumerate().map(|(i, t)| (t.cell, i)).collect();
    for &cell in &kept {
        if !cell_to_node.contains_key(&cell) {
            let idx = nodes.len();
            let (x, y) = raster.cell_center(cell);
            nodes.push(GraphNode {
                id: format!("t{}", idx - terminals.len()),
                kind: NodeKind::Transport,
                x,
                y,
                cell: Some(cell),
                members: Vec::new(),
            });
            cell_to_node.insert(cell, idx);
        }
    }

    // Deduplicate chains found from both ends, keep genuine parallel routes.
    let mut seen: BTreeSet<(usize, usize, Vec<(u32, u32)>)> = BTreeSet::new();
    let mut undirected: Vec<(usize, usize, Vec<Cell>)> = Vec::new();
    for (a, b, polyline) in chains {
        let (ia, ib) = (cell_to_node[&a], cell_to_node[&b]);
        let (lo, hi) = (ia.min(ib), ia.max(ib));
        let fingerprint = (lo, hi, key(&polyline));
        if seen.insert(fingerprint) {
            let oriented = if ia <= ib {
                polyline
            } else {
                polyline.into_iter().rev().collect()
            };
            undirected.push((lo, hi, oriented));
        }
    }
    undirected.sort_by(|a, b| (a.0, a.1, key(&a.2)).cmp(&(b.0, b.1, key(&b.2))));

    let mut arcs = Vec::new();
    for (a, b, polyline) in undirected {
        let length_km = path_length_km(raster, &polyline);
        let mut reversed = polyline.clone();
        reversed.reverse();
        arcs.push(CandidateArc {
            from: a,
            to: b,
            length_km,
            polyline,
        });
        arcs.push(CandidateArc {
            from: b,
            to: a,
            length_km,
            polyline: reversed,
        });
    }

    Ok(CandidateGraph {
        nodes,
        arcs,
        cell_size_km: raster.cell_size_km(),
        origin: raster.spec().origin,
        projection: raster.spec().projection.clone(),
    })
}

/// Total length of an undirected cell graph, used to check that contraction
/// conserves route length.
pub fn union_length_km(raster: &RasterMap, adjacency_edges: &BTreeSet<(Cell, Cell)>) -> f64 {
    adjacency_edges
        .iter()
        .map(|&(a, b)| step_length_km(raster, a, b))
        .sum()
}

/// Serializable document form of a candidate graph with per-scenario demands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub projection: String,
    pub cell_size_km: f64,
    pub origin: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub nodes: Vec<NodeDocument>,
    pub arcs: Vec<ArcDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDocument {
    pub id: String,
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
    pub members: Vec<String>,
    /// Demand per scenario and period in Mt/a.
    pub demand: BTreeMap<String, PeriodDemand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodDemand {
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcDocument {
    pub from: String,
    pub to: String,
    pub length_km: f64,
    pub polyline: Vec<(u32, u32)>,
}

impl CandidateGraph {
    /// Exports the graph as a structured document; demands come from the
    /// scenario set when given.
    pub fn to_document(
        &self,
        scenarios: Option<&ScenarioSet>,
        config_hash: Option<String>,
    ) -> GraphDocument {
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let mut demand = BTreeMap::new();
                if let Some(set) = scenarios {
                    for s in &set.scenarios {
                        demand.insert(
                            s.id.clone(),
                            PeriodDemand {
                                t0: n.demand_t0(s),
                                t1: n.demand_t1(s),
                            },
                        );
                    }
                }
                NodeDocument {
                    id: n.id.clone(),
                    kind: n.kind,
                    x: n.x,
                    y: n.y,
                    members: n.members.clone(),
                    demand,
                }
            })
            .collect();
        let arcs = self
            .arcs
            .iter()
            .map(|a| ArcDocument {
                from: self.nodes[a.from].id.clone(),
                to: self.nodes[a.to].id.clone(),
                length_km: a.length_km,
                polyline: a.polyline.iter().map(|c| (c.col, c.row)).collect(),
            })
            .collect();
        GraphDocument {
            projection: self.projection.clone(),
            cell_size_km: self.cell_size_km,
            origin: self.origin,
            config_hash,
            nodes,
            arcs,
        }
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self, GraphError> {
        let nodes: Vec<GraphNode> = doc
            .nodes
            .iter()
            .map(|n| GraphNode {
                id: n.id.clone(),
                kind: n.kind,
                x: n.x,
                y: n.y,
                cell: None,
                members: n.members.clone(),
            })
            .collect();
        let index: BTreeMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut arcs = Vec::new();
        for a in &doc.arcs {
            let from = *index
                .get(a.from.as_str())
                .ok_or_else(|| GraphError::UnknownNode(a.from.clone()))?;
            let to = *index
                .get(a.to.as_str())
                .ok_or_else(|| GraphError::UnknownNode(a.to.clone()))?;
            arcs.push(CandidateArc {
                from,
                to,
                length_km: a.length_km,
                polyline: a.polyline.iter().map(|&(c, r)| Cell::new(c, r)).collect(),
            });
        }
        Ok(Self {
            nodes,
            arcs,
            cell_size_km: doc.cell_size_km,
            origin: doc.origin,
            projection: doc.projection.clone(),
        })
    }
}
