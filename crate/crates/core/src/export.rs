//! Text exporters: DOT, JSON, CSV and SVG.
//!
//! CSV numbers are written with 17 significant digits. JSON numbers use the
//! shortest representation that parses back to the same `f64`.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::dynamics::Trajectory;
use crate::equilibria::format_point;
use crate::graph::{CtrlGraph, EdgeKind, SccDecomposition};
use crate::localctrl::SweepResult;
use crate::relax::ErrorPoint;
use crate::{Error, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

fn kind_name(k: EdgeKind) -> &'static str {
    match k {
        EdgeKind::Basin => "basin",
        EdgeKind::Transit => "transit",
    }
}

pub fn graph_dot(g: &CtrlGraph) -> String {
    let mut s = String::from("digraph ctrl {\n  node [shape=box];\n");
    for (i, n) in g.nodes().iter().enumerate() {
        let _ = writeln!(s, "  n{i} [label=\"{}\"];", format_point(&n.coords));
    }
    for e in g.edges() {
        let _ = write!(s, "  n{} -> n{} [kind={}, mode={}", e.from, e.to, kind_name(e.kind), e.mode);
        if let Some(u) = e.transit_mode {
            let _ = write!(s, ", transit_mode={u}, style=dashed");
        }
        s.push_str("];\n");
    }
    s.push_str("}\n");
    s
}

pub fn graph_json(g: &CtrlGraph) -> Value {
    let adj = g.adjacency();
    let nodes: Vec<Value> = g
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            json!({
                "id": i,
                "coords": n.coords.iter().map(|c| format!("{c}")).collect::<Vec<_>>(),
                "witnesses": n.witnesses.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                "successors": adj[i],
            })
        })
        .collect();
    json!({
        "max_mode": g.max_mode(),
        "dim": g.dim(),
        "region": g.region().map(|r| r.describe()),
        "nodes": nodes,
        "edges": g.edges(),
    })
}

pub fn scc_json(g: &CtrlGraph, d: &SccDecomposition) -> Value {
    let comps: Vec<Value> = d
        .components
        .iter()
        .enumerate()
        .map(|(c, members)| {
            json!({
                "id": c,
                "size": members.len(),
                "nodes": members,
                "labels": members.iter().map(|&m| format_point(&g.nodes()[m].coords)).collect::<Vec<_>>(),
                "successors": d.condensation[c],
            })
        })
        .collect();
    json!({ "count": d.len(), "components": comps })
}

/// One row per tested state: coordinates then 0/1 flag.
pub fn sweep_csv(r: &SweepResult) -> String {
    let mut s = String::new();
    let header: Vec<String> = (1..=r.particles).map(|i| format!("x{i}")).collect();
    let _ = writeln!(s, "{},flag", header.join(","));
    for (j, &f) in r.flags.iter().enumerate() {
        let coords: Vec<String> = r.state(j).into_iter().map(fmt_f64).collect();
        let _ = writeln!(s, "{},{}", coords.join(","), u8::from(f));
    }
    s
}

pub fn sweep_summary_json(r: &SweepResult) -> Value {
    json!({
        "total": r.total,
        "controllable": r.controllable,
        "percentage": r.percentage,
        "wilson_lo": r.wilson_lo,
        "wilson_hi": r.wilson_hi,
        "seed": r.seed,
        "params": {
            "kind": r.kind,
            "particles": r.particles,
            "modes": r.modes,
            "grid_points": r.grid_points,
            "z": r.z,
            "coefficients": r.coefficients,
        },
        "sensitivity": r.sensitivity(),
    })
}

/// Green/red heatmap for full two-particle grids, `x1` to the right and
/// `x2` upward.
pub fn sweep_svg(r: &SweepResult) -> Result<String> {
    if r.particles != 2 || !r.samples.is_empty() {
        return Err(Error::Config("heatmaps need a full two-particle grid sweep".into()));
    }
    let m = r.grid_points as usize;
    let cell = 4usize;
    let size = m * cell;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    for (j, &f) in r.flags.iter().enumerate() {
        let (i1, i2) = (j % m, j / m);
        let colour = if f { "#2ca02c" } else { "#d62728" };
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"{colour}\"/>",
            i1 * cell,
            (m - 1 - i2) * cell
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, |x| x.dim());
    let mut s = String::from("t");
    for i in 1..=n {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for (t, x) in traj.times.iter().zip(&traj.states) {
        s.push_str(&fmt_f64(*t));
        for &c in x.coords() {
            s.push(',');
            s.push_str(&fmt_f64(c));
        }
        s.push('\n');
    }
    s
}

pub fn error_report_json(points: &[ErrorPoint]) -> Value {
    json!(points)
}
