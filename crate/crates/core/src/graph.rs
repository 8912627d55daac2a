//! Controllability graph over assignable stable equilibria.
//!
//! Two kinds of edges connect equilibria `p → q`:
//!
//! * **basin**: `p` lies strictly inside `R_k(q)` for some mode `k`, so playing
//!   `k` drives `p` to `q`. Decided exactly on rationals.
//! * **transit**: the trajectory of `p` under some other mode `u` passes
//!   through `R_k(q)`; switching to `k` while inside captures the state.
//!   Found by sampling closed-form trajectories, then the switch window is
//!   computed exactly from per-coordinate crossing times.

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{crossing_time, flow_exact, midcell, settle_time, State};
use crate::equilibria::{
    assignable_equilibria, equilibrium_coords, locate_roa, locate_roa_exact, parse_rational,
    rational_to_f64, EquilibriumNode, Rational, RoaBox, RoaLocation,
};
use crate::error::{Error, Result};

/// Open axis-aligned box, optionally intersected with `x_1 > x_2 > … > x_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub lower: Vec<Rational>,
    pub upper: Vec<Rational>,
    pub descending: bool,
}

impl Region {
    pub fn cube(lower: Rational, upper: Rational, n: usize) -> Self {
        Self {
            lower: vec![lower; n],
            upper: vec![upper; n],
            descending: false,
        }
    }

    pub fn from_roa(b: &RoaBox) -> Self {
        Self {
            lower: b.lower(),
            upper: b.upper(),
            descending: false,
        }
    }

    /// `]0, 1/2[^n`, the region bounded by the invariant lines `x_i = 1/2`.
    pub fn lower_half(n: usize) -> Self {
        Self::cube(Rational::zero(), Rational::new(1, 2), n)
    }

    /// `{0 < x_1 < 1/2, x_2 < x_1}` and its n-particle analogue.
    pub fn lower_half_descending(n: usize) -> Self {
        Self {
            descending: true,
            ..Self::lower_half(n)
        }
    }

    /// Parses `LO,HI` (the cube `]LO,HI[^n`) with an optional `:desc` suffix.
    pub fn parse(spec: &str, n: usize) -> Result<Self> {
        let (bounds, descending) = match spec.trim().strip_suffix(":desc") {
            Some(b) => (b, true),
            None => (spec.trim(), false),
        };
        let (lo, hi) = bounds
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("region `{spec}` must look like LO,HI[:desc]")))?;
        let (lo, hi) = (parse_rational(lo)?, parse_rational(hi)?);
        if !(Rational::zero() <= lo && lo < hi && hi <= Rational::one()) {
            return Err(Error::Config(format!(
                "region `{spec}` needs 0 <= LO < HI <= 1"
            )));
        }
        Ok(Self {
            descending,
            ..Self::cube(lo, hi, n)
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains_exact(&self, x: &[Rational]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(c, (lo, hi))| lo < c && c < hi)
            && (!self.descending || x.windows(2).all(|w| w[1] < w[0]))
    }

    /// Closure membership for sampled trajectory states.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        const SLACK: f64 = 1e-12;
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&c, (lo, hi))| c >= rational_to_f64(lo) - SLACK && c <= rational_to_f64(hi) + SLACK)
            && (!self.descending || x.windows(2).all(|w| w[1] <= w[0] + SLACK))
    }

    pub fn describe(&self) -> String {
        let axes: Vec<String> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| {
                format!(
                    "]{},{}[",
                    crate::equilibria::format_rational(lo),
                    crate::equilibria::format_rational(hi)
                )
            })
            .collect();
        let mut s = axes.join("x");
        if self.descending {
            s.push_str(" with x1>x2>...");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Basin,
    Transit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtrlEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    /// Mode whose region of attraction captures `to`.
    pub mode: u32,
    /// Mode driving the trajectory, transit edges only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transit_mode: Option<u32>,
    /// Interval (in seconds from leaving `from`) during which the transit
    /// trajectory lies inside the capturing region.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_window: Option<(f64, f64)>,
}

impl CtrlEdge {
    fn sort_key(&self) -> (usize, usize, EdgeKind, u32, u32) {
        (self.from, self.to, self.kind, self.mode, self.transit_mode.unwrap_or(0))
    }
}

#[derive(Debug, Clone)]
pub struct CtrlGraph {
    nodes: Vec<EquilibriumNode>,
    edges: Vec<CtrlEdge>,
    max_mode: u32,
    region: Option<Region>,
    index: HashMap<Vec<Rational>, usize>,
}

impl CtrlGraph {
    fn from_nodes(nodes: Vec<EquilibriumNode>, max_mode: u32, region: Option<Region>) -> Self {
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.coords.clone(), i))
            .collect();
        Self {
            nodes,
            edges: Vec::new(),
            max_mode,
            region,
            index,
        }
    }

    pub fn nodes(&self) -> &[EquilibriumNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[CtrlEdge] {
        &self.edges
    }

    pub fn max_mode(&self) -> u32 {
        self.max_mode
    }

    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.coords.len())
    }

    pub fn node_id(&self, coords: &[Rational]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    /// Node id of `E_k(indices)`, if that point is in the graph.
    pub fn equilibrium_id(&self, k: u32, indices: &[u32]) -> Option<usize> {
        self.node_id(&equilibrium_coords(k, indices))
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    pub fn edges_between(&self, from: usize, to: usize) -> impl Iterator<Item = &CtrlEdge> {
        self.edges.iter().filter(move |e| e.from == from && e.to == to)
    }

    /// Adds edges, dropping self-loops and exact duplicates.
    pub fn add_edges<I: IntoIterator<Item = CtrlEdge>>(&mut self, edges: I) {
        let mut seen: BTreeSet<_> = self.edges.iter().map(CtrlEdge::sort_key).collect();
        for e in edges {
            assert!(e.from < self.nodes.len() && e.to < self.nodes.len());
            if e.from != e.to && seen.insert(e.sort_key()) {
                self.edges.push(e);
            }
        }
        self.edges.sort_by_key(CtrlEdge::sort_key);
    }

    /// Sorted, deduplicated successor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].push(e.to);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// The same graph with only the listed nodes (ids are renumbered).
    pub fn restrict(&self, keep: impl Fn(&EquilibriumNode) -> bool) -> CtrlGraph {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if keep(n) {
                remap[i] = nodes.len();
                nodes.push(n.clone());
            }
        }
        let mut g = CtrlGraph::from_nodes(nodes, self.max_mode, self.region.clone());
        g.add_edges(self.edges.iter().filter_map(|e| {
            let (f, t) = (remap[e.from], remap[e.to]);
            (f != usize::MAX && t != usize::MAX).then(|| CtrlEdge {
                from: f,
                to: t,
                ..e.clone()
            })
        }));
        g
    }
}

fn region_nodes(max_mode: u32, n: usize, region: Option<&Region>) -> Vec<EquilibriumNode> {
    assignable_equilibria(max_mode, n)
        .into_iter()
        .filter(|node| region.is_none_or(|r| r.contains_exact(&node.coords)))
        .collect()
}

/// Basin edges of `g` using capture modes `1..=modes`.
fn basin_edges(g: &CtrlGraph, modes: u32) -> Vec<CtrlEdge> {
    g.nodes
        .par_iter()
        .enumerate()
        .flat_map_iter(|(from, p)| {
            (1..=modes).filter_map(move |k| match locate_roa_exact(&p.coords, k) {
                RoaLocation::Inside(idx) => {
                    let to = g.equilibrium_id(k, &idx)?;
                    (to != from).then_some(CtrlEdge {
                        from,
                        to,
                        kind: EdgeKind::Basin,
                        mode: k,
                        transit_mode: None,
                        switch_window: None,
                    })
                }
                RoaLocation::Boundary => None,
            })
        })
        .collect()
}

/// Controllability graph with single-mode basin edges only.
///
/// Nodes are the deduplicated equilibria of modes `1..=max_mode` (inside
/// `region` when given); `p → q` under `k` iff `p ∈ R_k(q)`, exactly.
pub fn build_basin_graph(max_mode: u32, n: usize, region: Option<&Region>) -> CtrlGraph {
    assert!(max_mode >= 1 && n >= 1);
    if let Some(r) = region {
        assert_eq!(r.dim(), n, "region dimension must match particle count");
    }
    let mut g = CtrlGraph::from_nodes(region_nodes(max_mode, n, region), max_mode, region.cloned());
    let edges = basin_edges(&g, max_mode);
    g.add_edges(edges);
    g
}

/// Sampling parameters for transit-edge discovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitParams {
    /// Modes used to drive trajectories.
    pub transit_modes: Vec<u32>,
    /// Largest capture mode; defaults to the graph's maximum mode.
    pub capture_modes: u32,
    pub horizon: f64,
    pub dt_sample: f64,
    /// Restrict discovery to these source nodes.
    #[serde(default)]
    pub sources: Option<Vec<usize>>,
}

impl TransitParams {
    /// Every mode of the graph, horizon `12 / min A`, 2000 samples.
    pub fn for_graph(g: &CtrlGraph, a: &[f64]) -> Self {
        let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
        let horizon = 12.0 / min_a;
        Self {
            transit_modes: (1..=g.max_mode()).collect(),
            capture_modes: g.max_mode(),
            horizon,
            dt_sample: horizon / 2000.0,
            sources: None,
        }
    }
}

/// Depth a transit trajectory must reach inside the capturing box. Without it,
/// trajectories that only approach a box face asymptotically would get
/// windows whose points round onto the face, an unstable equilibrium of the
/// capture mode.
pub const WINDOW_MARGIN: f64 = 1e-6;

/// Exact time interval during which the trajectory of `x0` under mode `u`
/// lies in the box shrunk by [`WINDOW_MARGIN`], clipped to `[0, horizon]`.
pub fn transit_window(x0: &[f64], u: u32, a: &[f64], target: &RoaBox, horizon: f64) -> Option<(f64, f64)> {
    let k = f64::from(target.mode);
    let mut enter: f64 = 0.0;
    let mut leave: f64 = horizon;
    for ((&x, &ai), &i) in x0.iter().zip(a).zip(&target.indices) {
        let (lo, hi) = ((f64::from(i) - 1.0) / k + WINDOW_MARGIN, f64::from(i) / k - WINDOW_MARGIN);
        let limit = midcell(x, u);
        let y = f64::from(u) * x;
        if y == y.floor() || x == limit {
            // fixed coordinate
            if !(x > lo && x < hi) {
                return None;
            }
            continue;
        }
        // The coordinate moves monotonically from x towards `limit`.
        let (t_in, t_out) = if limit > x {
            if x >= hi || limit <= lo {
                return None;
            }
            let t_in = if x > lo { 0.0 } else { crossing_time(x, lo, u, ai)? };
            let t_out = if hi < limit { crossing_time(x, hi, u, ai)? } else { f64::INFINITY };
            (t_in, t_out)
        } else {
            if x <= lo || limit >= hi {
                return None;
            }
            let t_in = if x < hi { 0.0 } else { crossing_time(x, hi, u, ai)? };
            let t_out = if lo > limit { crossing_time(x, lo, u, ai)? } else { f64::INFINITY };
            (t_in, t_out)
        };
        enter = enter.max(t_in);
        leave = leave.min(t_out);
    }
    (enter < leave).then_some((enter, leave))
}

/// Sampled transit-edge discovery.
///
/// For each source and transit mode the closed-form trajectory is sampled at
/// `dt_sample` up to `horizon`; every sampled state strictly inside some
/// `R_k(q)` with `q` a graph node other than the source yields an edge. If the
/// graph has a region, sampling stops once the trajectory leaves its closure
/// and switch windows are cut at the last sample inside it. Targets whose
/// region of attraction already contains the source are skipped, as are hits
/// with an empty window.
pub fn discover_transit_edges(g: &CtrlGraph, a: &[f64], params: &TransitParams) -> Vec<CtrlEdge> {
    assert!(params.horizon > 0.0 && params.dt_sample > 0.0);
    let sources: Vec<usize> = params
        .sources
        .clone()
        .unwrap_or_else(|| (0..g.node_count()).collect());
    let samples = (params.horizon / params.dt_sample).round().max(1.0) as usize;
    let region = g.region();
    let mut found: Vec<CtrlEdge> = sources
        .par_iter()
        .flat_map_iter(|&from| {
            let p = g.nodes()[from].to_f64();
            let p_exact = &g.nodes()[from].coords;
            let mut out: Vec<CtrlEdge> = Vec::new();
            for &u in &params.transit_modes {
                let mut hits: BTreeSet<(usize, u32)> = BTreeSet::new();
                let mut last_inside = params.horizon;
                for s in 1..=samples {
                    let t = s as f64 * params.dt_sample;
                    let x = flow_exact(&p, u, a, t);
                    if region.is_some_and(|r| !r.contains_closed(&x)) {
                        last_inside = t - params.dt_sample;
                        break;
                    }
                    for k in 1..=params.capture_modes {
                        if k == u {
                            continue;
                        }
                        if let RoaLocation::Inside(idx) = locate_roa(&x, k) {
                            if let Some(to) = g.equilibrium_id(k, &idx) {
                                if to != from {
                                    hits.insert((to, k));
                                }
                            }
                        }
                    }
                }
                for (to, k) in hits {
                    let target = match locate_roa_exact(&g.nodes()[to].coords, k) {
                        RoaLocation::Inside(idx) => RoaBox { mode: k, indices: idx },
                        RoaLocation::Boundary => continue,
                    };
                    if target.contains_exact(p_exact) {
                        continue;
                    }
                    if let Some(window) = transit_window(&p, u, a, &target, last_inside) {
                        out.push(CtrlEdge {
                            from,
                            to,
                            kind: EdgeKind::Transit,
                            mode: k,
                            transit_mode: Some(u),
                            switch_window: Some(window),
                        });
                    }
                }
            }
            out
        })
        .collect();
    found.sort_by_key(CtrlEdge::sort_key);
    found
}

/// Basin graph plus every discovered transit edge.
pub fn build_full_graph(max_mode: u32, n: usize, region: Option<&Region>, a: &[f64]) -> CtrlGraph {
    let mut g = build_basin_graph(max_mode, n, region);
    let params = TransitParams::for_graph(&g, a);
    let transit = discover_transit_edges(&g, a, &params);
    g.add_edges(transit);
    g
}

/// Strongly connected components and their condensation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SccDecomposition {
    /// Components ordered by smallest node id; ids within a component ascend.
    pub components: Vec<Vec<usize>>,
    /// Component index of each node.
    pub component_of: Vec<usize>,
    /// Successor components in the condensation DAG.
    pub condensation: Vec<BTreeSet<usize>>,
}

impl SccDecomposition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn same_component(&self, a: usize, b: usize) -> bool {
        self.component_of[a] == self.component_of[b]
    }
}

/// Tarjan's algorithm, iterative.
pub fn scc_of_adjacency(adj: &[Vec<usize>]) -> SccDecomposition {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut raw: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next == 0 {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*next) {
                *next += 1;
                if index[w] == UNSEEN {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                raw.push(comp);
            }
        }
    }
    raw.sort_by_key(|c| c[0]);
    let mut component_of = vec![0; n];
    for (ci, comp) in raw.iter().enumerate() {
        for &v in comp {
            component_of[v] = ci;
        }
    }
    let mut condensation = vec![BTreeSet::new(); raw.len()];
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            let (cv, cw) = (component_of[v], component_of[w]);
            if cv != cw {
                condensation[cv].insert(cw);
            }
        }
    }
    SccDecomposition {
        components: raw,
        component_of,
        condensation,
    }
}

pub fn scc_decompose(g: &CtrlGraph) -> SccDecomposition {
    scc_of_adjacency(&g.adjacency())
}

/// Executable realization of a graph path as a sequence of mode dwells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSchedule {
    /// `(mode, dwell seconds)` in playing order.
    pub steps: Vec<(u32, f64)>,
    pub tolerance: f64,
    /// Node ids visited, source first.
    pub path: Vec<usize>,
}

impl ModeSchedule {
    pub fn execute(&self, x0: &[f64], a: &[f64]) -> State {
        let mut x = State::clamped(x0.to_vec());
        for &(u, d) in &self.steps {
            x = flow_exact(&x, u, a, d);
        }
        x
    }

    pub fn total_duration(&self) -> f64 {
        self.steps.iter().map(|s| s.1).sum()
    }
}

fn bfs_path(g: &CtrlGraph, from: usize, to: usize) -> Option<Vec<usize>> {
    let mut prev: Vec<Option<usize>> = vec![None; g.node_count()];
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); g.node_count()];
    for (ei, e) in g.edges().iter().enumerate() {
        out_edges[e.from].push(ei);
    }
    let mut seen = vec![false; g.node_count()];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = Vec::new();
            let mut cur = to;
            while let Some(ei) = prev[cur] {
                path.push(ei);
                cur = g.edges()[ei].from;
            }
            path.reverse();
            return Some(path);
        }
        for &ei in &out_edges[v] {
            let w = g.edges()[ei].to;
            if !seen[w] {
                seen[w] = true;
                prev[w] = Some(ei);
                queue.push_back(w);
            }
        }
    }
    None
}

fn settle_dwell(x: &[f64], k: u32, a: &[f64], tol: f64) -> Result<f64> {
    x.iter().zip(a).try_fold(0.0f64, |acc, (&xi, &ai)| {
        settle_time(xi, k, ai, tol)
            .map(|t| acc.max(t))
            .ok_or_else(|| Error::Domain(format!("coordinate {xi} does not settle under mode {k}")))
    })
}

/// Shortest edge path from `from` to `to`, turned into mode dwells.
///
/// Basin edges become one dwell long enough (in closed form) to bring every
/// coordinate within `tolerance / 2` of the target. Transit edges play the
/// transit mode until the middle of the switch window, recomputed from the
/// actual state, then settle under the capture mode.
pub fn plan_route(g: &CtrlGraph, from: usize, to: usize, a: &[f64], tolerance: f64) -> Result<ModeSchedule> {
    if from >= g.node_count() || to >= g.node_count() {
        return Err(Error::Domain("node id out of range".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let edges = bfs_path(g, from, to).ok_or(Error::Unreachable { from, to })?;
    let mut x = g.nodes()[from].to_f64();
    let mut steps = Vec::new();
    let mut path = vec![from];
    let target_tol = 0.5 * tolerance;
    let horizon = 12.0 / a.iter().copied().fold(f64::INFINITY, f64::min);
    for &ei in &edges {
        let e = &g.edges()[ei];
        if let (EdgeKind::Transit, Some(u)) = (e.kind, e.transit_mode) {
            let target = match locate_roa_exact(&g.nodes()[e.to].coords, e.mode) {
                RoaLocation::Inside(idx) => RoaBox { mode: e.mode, indices: idx },
                RoaLocation::Boundary => unreachable!("transit targets are equilibria of their capture mode"),
            };
            let (t0, t1) = transit_window(&x, u, a, &target, horizon)
                .or(e.switch_window)
                .ok_or_else(|| Error::Domain("transit window vanished".into()))?;
            let dwell = 0.5 * (t0 + t1);
            steps.push((u, dwell));
            x = flow_exact(&x, u, a, dwell).into_inner();
        }
        let dwell = settle_dwell(&x, e.mode, a, target_tol)?;
        if dwell > 0.0 {
            steps.push((e.mode, dwell));
            x = flow_exact(&x, e.mode, a, dwell).into_inner();
        }
        path.push(e.to);
    }
    Ok(ModeSchedule {
        steps,
        tolerance,
        path,
    })
}

/// Mode budgets of the refinement probe at its first level; both double at
/// every further level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeBudget {
    /// Modes available inside each sub-cell.
    pub cell_modes: u32,
    /// Modes available for edges joining the sub-cells.
    pub connector_modes: u32,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        Self {
            cell_modes: 18,
            connector_modes: 9,
        }
    }
}

impl ProbeBudget {
    /// Both budgets clamped to at most `cap` modes.
    pub fn capped(self, cap: u32) -> Self {
        Self {
            cell_modes: self.cell_modes.min(cap),
            connector_modes: self.connector_modes.min(cap),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: RoaBox,
    pub nodes: usize,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLevel {
    pub level: u32,
    pub cell_modes: u32,
    pub connector_modes: u32,
    pub cells: Vec<CellReport>,
    pub nodes: usize,
    pub components: usize,
}

#[derive(Debug, Clone)]
pub struct DensityProbe {
    pub levels: Vec<ProbeLevel>,
    /// Graph at the finest level.
    pub graph: CtrlGraph,
    pub decomposition: SccDecomposition,
}

fn sub_cells(parent: &RoaBox, level: u32) -> Vec<RoaBox> {
    let factor = 1u32 << level;
    let n = parent.indices.len();
    let mut cells = vec![Vec::new()];
    for &i in &parent.indices {
        let range = (i - 1) * factor + 1..=i * factor;
        cells = cells
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                range.clone().map(move |j| {
                    let mut v = prefix.clone();
                    v.push(j);
                    v
                })
            })
            .collect();
    }
    debug_assert!(cells.iter().all(|c| c.len() == n));
    cells
        .into_iter()
        .map(|indices| RoaBox {
            mode: parent.mode * factor,
            indices,
        })
        .collect()
}

fn graph_with_transit(nodes: Vec<EquilibriumNode>, modes: u32, region: &Region, a: &[f64]) -> CtrlGraph {
    let mut g = CtrlGraph::from_nodes(nodes, modes, Some(region.clone()));
    let basin = basin_edges(&g, modes);
    g.add_edges(basin);
    let params = TransitParams::for_graph(&g, a);
    let transit = discover_transit_edges(&g, a, &params);
    g.add_edges(transit);
    g
}

/// Finite-depth probe of the recursive refinement argument for density of
/// reachable equilibria.
///
/// At level `L` the region is split into `2^(L n)` sub-cells. Inside each
/// sub-cell the equilibria of modes up to `cell_modes · 2^(L-1)` and the
/// basin and transit edges among them (trajectories kept inside the closed
/// sub-cell) form that cell's graph; the level graph adds edges using modes
/// up to `connector_modes · 2^(L-1)` with trajectories kept inside the
/// region. Depth 0 is the unrefined region graph with the connector budget.
pub fn density_probe(region: &RoaBox, depth: u32, a: &[f64], budget: ProbeBudget) -> DensityProbe {
    let n = region.indices.len();
    let outer = Region::from_roa(region);
    if depth == 0 {
        let modes = budget.connector_modes;
        let graph = graph_with_transit(region_nodes(modes, n, Some(&outer)), modes, &outer, a);
        let decomposition = scc_decompose(&graph);
        let levels = vec![ProbeLevel {
            level: 0,
            cell_modes: modes,
            connector_modes: modes,
            cells: Vec::new(),
            nodes: graph.node_count(),
            components: decomposition.len(),
        }];
        return DensityProbe {
            levels,
            graph,
            decomposition,
        };
    }
    let mut levels = Vec::new();
    let mut finest = None;
    for level in 1..=depth {
        let scale = 1u32 << (level - 1);
        let cell_modes = budget.cell_modes * scale;
        let connector_modes = budget.connector_modes * scale;
        let cells = sub_cells(region, level);
        let mut reports = Vec::new();
        let mut level_graph = {
            let all = region_nodes(cell_modes, n, Some(&outer));
            let cell_regions: Vec<Region> = cells.iter().map(Region::from_roa).collect();
            let kept: Vec<EquilibriumNode> = all
                .into_iter()
                .filter(|node| cell_regions.iter().any(|r| r.contains_exact(&node.coords)))
                .collect();
            CtrlGraph::from_nodes(kept, cell_modes, Some(outer.clone()))
        };
        for cell in &cells {
            let cell_region = Region::from_roa(cell);
            let nodes = region_nodes(cell_modes, n, Some(&cell_region));
            let g = graph_with_transit(nodes, cell_modes, &cell_region, a);
            let scc = scc_decompose(&g);
            reports.push(CellReport {
                cell: cell.clone(),
                nodes: g.node_count(),
                components: scc.len(),
            });
            let lifted: Vec<CtrlEdge> = g
                .edges()
                .iter()
                .map(|e| CtrlEdge {
                    from: level_graph.node_id(&g.nodes()[e.from].coords).expect("cell node"),
                    to: level_graph.node_id(&g.nodes()[e.to].coords).expect("cell node"),
                    ..e.clone()
                })
                .collect();
            level_graph.add_edges(lifted);
        }
        let connectors = {
            let mut params = TransitParams::for_graph(&level_graph, a);
            params.transit_modes = (1..=connector_modes).collect();
            params.capture_modes = connector_modes;
            let mut e = basin_edges(&level_graph, connector_modes);
            e.extend(discover_transit_edges(&level_graph, a, &params));
            e
        };
        level_graph.add_edges(connectors);
        let decomposition = scc_decompose(&level_graph);
        levels.push(ProbeLevel {
            level,
            cell_modes,
            connector_modes,
            cells: reports,
            nodes: level_graph.node_count(),
            components: decomposition.len(),
        });
        finest = Some((level_graph, decomposition));
    }
    let (graph, decomposition) = finest.expect("depth >= 1");
    DensityProbe {
        levels,
        graph,
        decomposition,
    }
}
