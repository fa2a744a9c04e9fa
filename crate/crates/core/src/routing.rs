//! Per-trial connectivity graphs and widest (maximum-bottleneck) paths.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::acoustic::{self, AcousticParams};
use crate::error::{Error, Result};
use crate::geometry::{link_geometry, Deployment, FaceSet, Vec3};
use crate::optical::{self, OpticalParams, WaterType};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tech {
    Optical,
    Acoustic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkMode {
    Optical,
    Acoustic,
    Hybrid,
}

impl NetworkMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkMode::Optical => "optical",
            NetworkMode::Acoustic => "acoustic",
            NetworkMode::Hybrid => "hybrid",
        }
    }

    pub fn uses_optical(self) -> bool {
        matches!(self, NetworkMode::Optical | NetworkMode::Hybrid)
    }

    pub fn uses_acoustic(self) -> bool {
        matches!(self, NetworkMode::Acoustic | NetworkMode::Hybrid)
    }
}

impl fmt::Display for NetworkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: NodeId,
    pub is_sink: bool,
    pub position: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub capacity_bps: f64,
    pub ber: f64,
    pub tech: Tech,
}

/// Directed graph of feasible links. Node ids are dense: IoUT nodes are
/// `0..n` and the surface station is `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct NetworkGraph {
    nodes: Vec<GraphNode>,
    sink: NodeId,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    sink: NodeId,
    nodes: Vec<GraphNode>,
    edges: Vec<Edge>,
}

impl From<NetworkGraph> for GraphDoc {
    fn from(g: NetworkGraph) -> Self {
        GraphDoc {
            sink: g.sink,
            nodes: g.nodes,
            edges: g.edges,
        }
    }
}

impl TryFrom<GraphDoc> for NetworkGraph {
    type Error = Error;
    fn try_from(doc: GraphDoc) -> Result<Self> {
        NetworkGraph::new(doc.nodes, doc.sink, doc.edges)
    }
}

impl NetworkGraph {
    /// Checks ids, self-loops and capacities, then indexes adjacency.
    pub fn new(nodes: Vec<GraphNode>, sink: NodeId, edges: Vec<Edge>) -> Result<Self> {
        let n = nodes.len();
        if nodes.iter().enumerate().any(|(i, v)| v.id != i) {
            return Err(Error::Serialization(
                "node ids must be 0..n in order".into(),
            ));
        }
        if sink >= n {
            return Err(Error::UnknownNode(sink));
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            if e.src >= n {
                return Err(Error::UnknownNode(e.src));
            }
            if e.dst >= n {
                return Err(Error::UnknownNode(e.dst));
            }
            if e.src == e.dst {
                return Err(Error::Domain(format!("self-loop on node {}", e.src)));
            }
            if !(e.capacity_bps > 0.0) {
                return Err(Error::Domain(format!(
                    "edge {}->{} has non-positive capacity",
                    e.src, e.dst
                )));
            }
            out_adj[e.src].push(k);
            in_adj[e.dst].push(k);
        }
        Ok(NetworkGraph {
            nodes,
            sink,
            edges,
            out_adj,
            in_adj,
        })
    }

    /// Graph on ids `0..n` without positions, mostly for tests and tools.
    pub fn from_edges(n: usize, sink: NodeId, edges: Vec<Edge>) -> Result<Self> {
        let nodes = (0..n)
            .map(|id| GraphNode {
                id,
                is_sink: id == sink,
                position: Vec3::ZERO,
            })
            .collect();
        Self::new(nodes, sink, edges)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: NodeId) -> impl Iterator<Item = &Edge> {
        self.out_adj[v].iter().map(move |&k| &self.edges[k])
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if v < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(v))
        }
    }
}

/// Builds the directed link graph for one deployment. Optical edges need
/// an in-beam link that passes the FEC gate; acoustic edges need only the
/// FEC gate and always come in symmetric pairs.
pub fn build_graph(
    dep: &Deployment,
    faces: &FaceSet,
    opt: &OpticalParams,
    water: &WaterType,
    aco: Option<&AcousticParams>,
    mode: NetworkMode,
) -> Result<NetworkGraph> {
    if mode.uses_acoustic() && aco.is_none() {
        return Err(Error::config(
            "acoustic",
            format!("{mode} mode needs acoustic parameters"),
        ));
    }
    let n = dep.node_count();
    let positions: Vec<Vec3> = dep
        .node_positions
        .iter()
        .copied()
        .chain(std::iter::once(dep.sink_position))
        .collect();
    let nodes: Vec<GraphNode> = positions
        .iter()
        .enumerate()
        .map(|(id, &position)| GraphNode {
            id,
            is_sink: id == n,
            position,
        })
        .collect();

    let mut edges = Vec::new();
    for (u, &pu) in positions.iter().enumerate() {
        for (v, &pv) in positions.iter().enumerate() {
            if u == v {
                continue;
            }
            if mode.uses_optical() {
                let geom = link_geometry(pu, faces, pv, faces)?;
                let link = optical::link_budget(&geom, faces, opt, water);
                if link.capacity > 0.0 {
                    edges.push(Edge {
                        src: u,
                        dst: v,
                        capacity_bps: link.capacity,
                        ber: link.ber,
                        tech: Tech::Optical,
                    });
                }
            }
            if let (true, Some(aco)) = (mode.uses_acoustic(), aco) {
                // Below the 1 m reference distance the loss model is
                // undefined; treat the pair as sitting at 1 m.
                let d = pu.distance(pv).max(1.0);
                let cap = acoustic::capacity(d, aco)?;
                if cap > 0.0 {
                    edges.push(Edge {
                        src: u,
                        dst: v,
                        capacity_bps: cap,
                        ber: acoustic::ber(d, aco)?,
                        tech: Tech::Acoustic,
                    });
                }
            }
        }
    }
    NetworkGraph::new(nodes, n, edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub path: Vec<NodeId>,
    pub bottleneck_rate: f64,
}

#[derive(PartialEq)]
struct Width(f64, NodeId);

impl Eq for Width {}

impl Ord for Width {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Width {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Max-min Dijkstra. With `reverse` the search follows edges backwards, so
/// `width[v]` is the best bottleneck from `v` to `root`; otherwise from
/// `root` to `v`. Unreachable nodes get 0, the root itself +∞.
fn widths(g: &NetworkGraph, root: NodeId, reverse: bool) -> Vec<f64> {
    let n = g.node_count();
    let mut width = vec![0.0f64; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    width[root] = f64::INFINITY;
    heap.push(Width(f64::INFINITY, root));
    while let Some(Width(w, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        let adj = if reverse { &g.in_adj[u] } else { &g.out_adj[u] };
        for &k in adj {
            let e = &g.edges[k];
            let v = if reverse { e.src } else { e.dst };
            let cand = w.min(e.capacity_bps);
            if !done[v] && cand > width[v] {
                width[v] = cand;
                heap.push(Width(cand, v));
            }
        }
    }
    width
}

/// Widest path from `src` to `dst`. Among paths with the optimal
/// bottleneck, the one with fewest hops wins, then the lexicographically
/// smallest id sequence.
pub fn widest_path(g: &NetworkGraph, src: NodeId, dst: NodeId) -> Result<Option<PathResult>> {
    g.check(src)?;
    g.check(dst)?;
    if src == dst {
        return Ok(Some(PathResult {
            path: vec![src],
            bottleneck_rate: f64::INFINITY,
        }));
    }
    let best = widths(g, src, false)[dst];
    if best <= 0.0 {
        return Ok(None);
    }
    // Hop distances to dst over edges that can carry the optimum.
    let n = g.node_count();
    let mut hops = vec![usize::MAX; n];
    hops[dst] = 0;
    let mut queue = VecDeque::from([dst]);
    while let Some(v) = queue.pop_front() {
        for &k in &g.in_adj[v] {
            let e = &g.edges[k];
            if e.capacity_bps >= best && hops[e.src] == usize::MAX {
                hops[e.src] = hops[v] + 1;
                queue.push_back(e.src);
            }
        }
    }
    let mut path = vec![src];
    let mut cur = src;
    while cur != dst {
        cur = g
            .out_edges(cur)
            .filter(|e| {
                e.capacity_bps >= best && hops[e.dst] != usize::MAX && hops[e.dst] + 1 == hops[cur]
            })
            .map(|e| e.dst)
            .min()
            .expect("hop labels guarantee a successor");
        path.push(cur);
    }
    Ok(Some(PathResult {
        path,
        bottleneck_rate: best,
    }))
}

/// Bottleneck rate from every non-sink node to `sink`; 0 when unreachable.
pub fn e2e_rates(g: &NetworkGraph, sink: NodeId) -> Result<BTreeMap<NodeId, f64>> {
    g.check(sink)?;
    let w = widths(g, sink, true);
    Ok((0..g.node_count())
        .filter(|&v| v != sink)
        .map(|v| (v, w[v]))
        .collect())
}

/// True iff every node reaches the sink at `threshold` bps or better.
pub fn is_connected(rates: &BTreeMap<NodeId, f64>, threshold: f64) -> bool {
    rates.values().all(|&r| r >= threshold)
}
