//! Solution exports: GeoJSON feature collections and breakdown CSV.
//!
//! Period-0 features are the built arcs. Period-1 features exist only where
//! something happened: a new or parallel line, or a pressure increase on a
//! built arc; an unchanged second stage exports an empty period-1 set.

use crate::economics::round_mio;
use crate::engine::{PlanSolution, UpgradeOption};
use crate::graph::CandidateGraph;
use serde_json::{json, Value};
use std::fmt::Write as _;

fn arc_geometry(graph: &CandidateGraph, arc: usize) -> Value {
    let a = &graph.arcs[arc];
    let coords: Vec<[f64; 2]> = if a.polyline.is_empty() {
        vec![
            [graph.nodes[a.from].x, graph.nodes[a.from].y],
            [graph.nodes[a.to].x, graph.nodes[a.to].y],
        ]
    } else {
        a.polyline
            .iter()
            .map(|c| {
                [
                    graph.origin.0 + (c.col as f64 + 0.5) * graph.cell_size_km,
                    graph.origin.1 + (c.row as f64 + 0.5) * graph.cell_size_km,
                ]
            })
            .collect()
    };
    json!({ "type": "LineString", "coordinates": coords })
}

fn feature(graph: &CandidateGraph, arc: usize, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": arc_geometry(graph, arc),
        "properties": properties,
    })
}

/// The solution as a GeoJSON feature collection, one feature per period-0
/// build and per period-1 action, tagged with period, scenario, trend, flow
/// and upgrade operation.
pub fn solution_geojson(graph: &CandidateGraph, solution: &PlanSolution) -> Value {
    let mut features = Vec::new();
    for (&arc, build) in &solution.first_stage.builds {
        features.push(feature(
            graph,
            arc,
            json!({
                "period": 0,
                "from": graph.nodes[graph.arcs[arc].from].id,
                "to": graph.nodes[graph.arcs[arc].to].id,
                "trend": build.trend,
                "flow_mta": build.flow_mta,
                "upgrade_op": Value::Null,
            }),
        ));
    }
    for (scenario, outcome) in &solution.scenarios {
        for (&arc, upgrade) in &outcome.upgrades {
            let (op, trend, flow) = match upgrade.option {
                UpgradeOption::PressureIncrease => {
                    let Some(stage1) = solution.first_stage.builds.get(&arc) else {
                        continue;
                    };
                    ("pressure_increase", stage1.trend, upgrade.flow_mta)
                }
                UpgradeOption::LoopOrNew => {
                    let Some(new_build) = &upgrade.new_build else {
                        continue;
                    };
                    ("new_or_parallel_line", new_build.trend, upgrade.flow_mta)
                }
            };
            features.push(feature(
                graph,
                arc,
                json!({
                    "period": 1,
                    "scenario": scenario,
                    "from": graph.nodes[graph.arcs[arc].from].id,
                    "to": graph.nodes[graph.arcs[arc].to].id,
                    "trend": trend,
                    "flow_mta": flow,
                    "upgrade_op": op,
                }),
            ));
        }
    }
    json!({
        "type": "FeatureCollection",
        "properties": {
            "projection": graph.projection,
            "config_hash": solution.config_hash,
        },
        "features": features,
    })
}

/// Per-scenario cost breakdown of one solution as CSV (million EUR); one
/// row per scenario.
pub fn solution_breakdown_csv(solution: &PlanSolution) -> String {
    let mut out =
        String::from("scenario,i0,o0,i1,restructuring,o1,total,best,regret\n");
    for (scenario, outcome) in &solution.scenarios {
        let b = &outcome.breakdown;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{:.3}", round_mio(v)));
        writeln!(
            out,
            "{scenario},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{},{}",
            round_mio(b.i0),
            round_mio(b.o0),
            round_mio(b.i1),
            round_mio(b.restructuring),
            round_mio(b.o1),
            round_mio(b.total),
            opt(b.best),
            opt(b.regret),
        )
        .unwrap();
    }
    out
}
