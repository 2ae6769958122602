//! Synthetic laundering structures for benchmarks, plus per-node structural
//! statistics.
//!
//! Six shapes: fan-in (many accounts pay one), fan-out (one pays many),
//! gather-scatter (fan-in whose hub later redistributes the gathered
//! amount), bipartite (transfers only between two disjoint sets), stack
//! (funds relayed along a path with increasing timestamps) and random
//! background traffic. Injection grafts a generated shape onto an existing
//! graph by mapping one designated node of the shape onto a randomly chosen
//! anchor; the anchor role is always one that only receives pattern edges,
//! so every injected node stays reachable from fresh zero-in-degree nodes.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{DegreeMode, Edge, GraphBuilder, NodeId, TransactionGraph};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    FanIn,
    FanOut,
    GatherScatter,
    Bipartite,
    Stack,
    Random,
}

impl PatternKind {
    pub fn name(self) -> &'static str {
        match self {
            PatternKind::FanIn => "fan_in",
            PatternKind::FanOut => "fan_out",
            PatternKind::GatherScatter => "gather_scatter",
            PatternKind::Bipartite => "bipartite",
            PatternKind::Stack => "stack",
            PatternKind::Random => "random",
        }
    }
}

/// Shape plus its per-kind size parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatternShape {
    FanIn { width: u32 },
    FanOut { width: u32 },
    GatherScatter { fan_in: u32, fan_out: u32 },
    Bipartite { left: u32, right: u32 },
    /// Path of `length` nodes (`length - 1` edges), `length >= 2`.
    Stack { length: u32 },
    /// Uniform directed edges between `nodes` nodes, no self-loops.
    Random { nodes: u32, edges: u64 },
}

impl PatternShape {
    pub fn kind(&self) -> PatternKind {
        match self {
            PatternShape::FanIn { .. } => PatternKind::FanIn,
            PatternShape::FanOut { .. } => PatternKind::FanOut,
            PatternShape::GatherScatter { .. } => PatternKind::GatherScatter,
            PatternShape::Bipartite { .. } => PatternKind::Bipartite,
            PatternShape::Stack { .. } => PatternKind::Stack,
            PatternShape::Random { .. } => PatternKind::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSpec {
    pub shape: PatternShape,
    /// Inclusive draw range for edge amounts.
    pub weight_range: (f64, f64),
    /// Inclusive draw range for edge timestamps.
    pub time_range: (u64, u64),
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    /// Initiates transfers into the pattern (zero in-degree inside it).
    Source,
    /// Central collecting/distributing account.
    Hub,
    /// Receives pattern funds.
    Destination,
    /// Relay position inside a stack.
    Interior,
    /// Bipartite left/right membership.
    Left,
    Right,
    /// Random-pattern participant.
    Member,
}

/// A generated shape over local node ids `0..node_count`.
#[derive(Debug, Clone)]
pub struct GeneratedPattern {
    pub kind: PatternKind,
    pub node_count: u32,
    pub roles: Vec<NodeRole>,
    pub edges: Vec<Edge>,
    /// Local id mapped onto an existing graph node at injection.
    pub anchor: u32,
}

/// What one injection added to the graph. All listed nodes (anchor
/// included) carry ground-truth label 1.
#[derive(Debug, Clone)]
pub struct InjectionRecord {
    pub spec: PatternSpec,
    pub anchor: NodeId,
    pub injected_nodes: Vec<NodeId>,
    pub injected_edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternError {
    SizeTooSmall { kind: PatternKind, detail: &'static str },
    InvalidWeightRange(f64, f64),
    InvalidTimeRange(u64, u64),
    EmptyBackground,
    UnknownNode(NodeId),
}

impl fmt::Display for PatternError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternError::SizeTooSmall { kind, detail } => {
                write!(f, "{} pattern too small: {detail}", kind.name())
            }
            PatternError::InvalidWeightRange(lo, hi) => {
                write!(f, "weight range [{lo}, {hi}] invalid")
            }
            PatternError::InvalidTimeRange(lo, hi) => {
                write!(f, "time range [{lo}, {hi}] invalid")
            }
            PatternError::EmptyBackground => {
                write!(f, "cannot inject into a graph with no nodes")
            }
            PatternError::UnknownNode(v) => write!(f, "unknown node id {v}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PatternError {}

fn validate(spec: &PatternSpec) -> Result<(), PatternError> {
    let (wl, wh) = spec.weight_range;
    if !(wl.is_finite() && wh.is_finite() && 0.0 <= wl && wl <= wh) {
        return Err(PatternError::InvalidWeightRange(wl, wh));
    }
    let (tl, th) = spec.time_range;
    if tl > th {
        return Err(PatternError::InvalidTimeRange(tl, th));
    }
    let err = |detail| Err(PatternError::SizeTooSmall { kind: spec.shape.kind(), detail });
    match spec.shape {
        PatternShape::FanIn { width } | PatternShape::FanOut { width } if width < 1 => {
            err("width must be >= 1")
        }
        PatternShape::GatherScatter { fan_in, fan_out } if fan_in < 1 || fan_out < 1 => {
            err("both fan sizes must be >= 1")
        }
        PatternShape::Bipartite { left, right } if left < 1 || right < 1 => {
            err("both set sizes must be >= 1")
        }
        PatternShape::Stack { length } if length < 2 => err("a path needs at least one edge"),
        PatternShape::Random { nodes, .. } if nodes < 1 => err("need at least one node"),
        _ => Ok(()),
    }
}

/// Deterministically generate the shape described by `spec`.
pub fn generate_pattern(spec: &PatternSpec) -> Result<GeneratedPattern, PatternError> {
    validate(spec)?;
    let mut rng_state = rng::stream(spec.seed);
    let (wl, wh) = spec.weight_range;
    let (tl, th) = spec.time_range;
    let draw_w = |r: &mut _| rng::range_f64(r, wl, wh);
    let draw_t = |r: &mut _| rng::range_u64(r, tl, th);
    let kind = spec.shape.kind();

    let pattern = match spec.shape {
        PatternShape::FanIn { width } => {
            // hub = 0 (anchor), sources 1..=width
            let mut roles = vec![NodeRole::Hub];
            roles.resize(width as usize + 1, NodeRole::Source);
            let edges = (1..=width)
                .map(|i| Edge {
                    src: i,
                    dst: 0,
                    weight: draw_w(&mut rng_state),
                    timestamp: draw_t(&mut rng_state),
                })
                .collect();
            GeneratedPattern { kind, node_count: width + 1, roles, edges, anchor: 0 }
        }
        PatternShape::FanOut { width } => {
            // hub = 0 (fresh, a zero-in-degree initiator), anchor = first leaf
            let mut roles = vec![NodeRole::Hub];
            roles.resize(width as usize + 1, NodeRole::Destination);
            let edges = (1..=width)
                .map(|i| Edge {
                    src: 0,
                    dst: i,
                    weight: draw_w(&mut rng_state),
                    timestamp: draw_t(&mut rng_state),
                })
                .collect();
            GeneratedPattern { kind, node_count: width + 1, roles, edges, anchor: 1 }
        }
        PatternShape::GatherScatter { fan_in, fan_out } => {
            // gather in the first half of the window, scatter later; the hub
            // passes the gathered total on in equal parts
            let mid = tl + (th - tl) / 2;
            let mut roles = vec![NodeRole::Hub];
            roles.extend(core::iter::repeat(NodeRole::Source).take(fan_in as usize));
            roles.extend(core::iter::repeat(NodeRole::Destination).take(fan_out as usize));
            let mut edges = Vec::with_capacity((fan_in + fan_out) as usize);
            let mut gathered = 0.0;
            for i in 1..=fan_in {
                let w = draw_w(&mut rng_state);
                gathered += w;
                edges.push(Edge {
                    src: i,
                    dst: 0,
                    weight: w,
                    timestamp: rng::range_u64(&mut rng_state, tl, mid),
                });
            }
            let out_share = gathered / fan_out as f64;
            for i in 1..=fan_out {
                edges.push(Edge {
                    src: 0,
                    dst: fan_in + i,
                    weight: out_share,
                    timestamp: rng::range_u64(&mut rng_state, mid, th),
                });
            }
            GeneratedPattern {
                kind,
                node_count: fan_in + fan_out + 1,
                roles,
                edges,
                anchor: fan_in + 1,
            }
        }
        PatternShape::Bipartite { left, right } => {
            // complete left -> right; anchor = first right node
            let mut roles = Vec::with_capacity((left + right) as usize);
            roles.extend(core::iter::repeat(NodeRole::Left).take(left as usize));
            roles.extend(core::iter::repeat(NodeRole::Right).take(right as usize));
            let mut edges = Vec::with_capacity((left * right) as usize);
            for l in 0..left {
                for r in 0..right {
                    edges.push(Edge {
                        src: l,
                        dst: left + r,
                        weight: draw_w(&mut rng_state),
                        timestamp: draw_t(&mut rng_state),
                    });
                }
            }
            GeneratedPattern { kind, node_count: left + right, roles, edges, anchor: left }
        }
        PatternShape::Stack { length } => {
            // one amount relayed along the path, timestamps ascending;
            // anchor = tail
            let mut roles = vec![NodeRole::Interior; length as usize];
            roles[0] = NodeRole::Source;
            roles[length as usize - 1] = NodeRole::Destination;
            let amount = draw_w(&mut rng_state);
            let mut times: Vec<u64> =
                (0..length - 1).map(|_| draw_t(&mut rng_state)).collect();
            times.sort_unstable();
            let edges = (0..length - 1)
                .map(|i| Edge {
                    src: i,
                    dst: i + 1,
                    weight: amount,
                    timestamp: times[i as usize],
                })
                .collect();
            GeneratedPattern { kind, node_count: length, roles, edges, anchor: length - 1 }
        }
        PatternShape::Random { nodes, edges } => {
            let roles = vec![NodeRole::Member; nodes as usize];
            let mut out = Vec::with_capacity(edges as usize);
            for _ in 0..edges {
                let src = rng::below(&mut rng_state, nodes as u64) as u32;
                let dst = if nodes == 1 {
                    src
                } else {
                    let mut d = rng::below(&mut rng_state, nodes as u64) as u32;
                    if d == src {
                        d = (d + 1) % nodes;
                    }
                    d
                };
                out.push(Edge {
                    src,
                    dst,
                    weight: draw_w(&mut rng_state),
                    timestamp: draw_t(&mut rng_state),
                });
            }
            GeneratedPattern { kind, node_count: nodes, roles, edges: out, anchor: 0 }
        }
    };
    Ok(pattern)
}

/// Build a standalone graph from a single spec (used for backgrounds).
pub fn pattern_graph(spec: &PatternSpec) -> Result<TransactionGraph, PatternError> {
    let p = generate_pattern(spec)?;
    let mut b = GraphBuilder::with_capacity(p.node_count as usize, p.edges.len());
    for n in 0..p.node_count {
        b.ensure_node(n);
    }
    for e in &p.edges {
        b.add_edge(e.src, e.dst, e.weight, e.timestamp).expect("validated weights");
    }
    Ok(b.build())
}

/// Canonical ordering makes injection invariant to the order specs are
/// listed in (for disjoint anchor choices the resulting graphs coincide).
fn canonical_order(specs: &[PatternSpec]) -> Vec<&PatternSpec> {
    let mut refs: Vec<&PatternSpec> = specs.iter().collect();
    refs.sort_by_key(|s| {
        let kind_code = s.shape.kind() as u8;
        (s.seed, kind_code)
    });
    refs
}

/// Attach each generated pattern to the graph: the pattern's anchor role is
/// played by a seeded-random existing node, every other pattern node gets a
/// fresh id. Returns the merged graph and one record per pattern; record
/// nodes are the ground-truth positives.
pub fn inject(
    g: &TransactionGraph,
    specs: &[PatternSpec],
) -> Result<(TransactionGraph, Vec<InjectionRecord>), PatternError> {
    if specs.is_empty() {
        return Ok((g.clone(), Vec::new()));
    }
    if g.node_count() == 0 {
        return Err(PatternError::EmptyBackground);
    }
    let mut builder = GraphBuilder::with_capacity(g.node_count(), g.edge_count());
    builder.ensure_node(g.node_count() as NodeId - 1);
    for e in g.edges() {
        builder.add_edge(e.src, e.dst, e.weight, e.timestamp).expect("existing edges valid");
    }
    let mut records = Vec::with_capacity(specs.len());
    let mut next_id = g.node_count() as NodeId;
    for spec in canonical_order(specs) {
        let pattern = generate_pattern(spec)?;
        let mut anchor_rng = rng::stream(spec.seed ^ 0x616e_63686f72); // distinct stream per spec
        let anchor = rng::below(&mut anchor_rng, g.node_count() as u64) as NodeId;
        let mut mapping = Vec::with_capacity(pattern.node_count as usize);
        for local in 0..pattern.node_count {
            if local == pattern.anchor {
                mapping.push(anchor);
            } else {
                mapping.push(next_id);
                next_id += 1;
            }
        }
        let mut injected_edges = Vec::with_capacity(pattern.edges.len());
        for e in &pattern.edges {
            let edge = Edge {
                src: mapping[e.src as usize],
                dst: mapping[e.dst as usize],
                weight: e.weight,
                timestamp: e.timestamp,
            };
            builder
                .add_edge(edge.src, edge.dst, edge.weight, edge.timestamp)
                .expect("generated weights valid");
            injected_edges.push(edge);
        }
        records.push(InjectionRecord {
            spec: *spec,
            anchor,
            injected_nodes: mapping,
            injected_edges,
        });
    }
    let mut merged = builder.build();
    if g.has_labels() {
        let kept: Vec<(NodeId, bool)> = (0..g.node_count() as NodeId)
            .filter_map(|v| g.label(v).map(|l| (v, l)))
            .collect();
        merged.set_labels(kept).expect("labels within old range");
    }
    Ok((merged, records))
}

/// Per-node structural statistics used to sanity-check generated shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralStats {
    /// Weighted incoming volume.
    pub fan_in: f64,
    /// Weighted outgoing volume.
    pub fan_out: f64,
    pub gather_scatter: f64,
    /// Outgoing volume averaged over the distinct next-layer nodes; 0 for
    /// nodes without successors.
    pub random: f64,
    /// Longest forward chain measured on the BFS layering from the node
    /// (edges into strictly deeper layers only, so cycles terminate).
    pub longest_path: u32,
    /// Whether the undirected subgraph induced by the node and its
    /// neighbors is 2-colorable.
    pub bipartite_neighborhood: bool,
}

pub fn structural_checks(
    g: &TransactionGraph,
    v: NodeId,
) -> Result<StructuralStats, PatternError> {
    if v as usize >= g.node_count() {
        return Err(PatternError::UnknownNode(v));
    }
    let fan_in = g.fan_in(v, DegreeMode::Weighted).expect("checked");
    let fan_out = g.fan_out(v, DegreeMode::Weighted).expect("checked");

    let mut successors: Vec<NodeId> = g.out_edges(v).map(|e| e.dst).collect();
    successors.sort_unstable();
    successors.dedup();
    let random = if successors.is_empty() { 0.0 } else { fan_out / successors.len() as f64 };

    // BFS layering from v; the longest path counts only edges that advance
    // a layer, which is exact on generated stacks and finite everywhere.
    let mut dist = vec![u32::MAX; g.node_count()];
    dist[v as usize] = 0;
    let mut queue = vec![v];
    let mut head = 0;
    let mut longest = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        for e in g.out_edges(u) {
            if dist[e.dst as usize] == u32::MAX {
                dist[e.dst as usize] = dist[u as usize] + 1;
                longest = longest.max(dist[e.dst as usize]);
                queue.push(e.dst);
            }
        }
    }

    Ok(StructuralStats {
        fan_in,
        fan_out,
        gather_scatter: fan_in + fan_out,
        random,
        longest_path: longest,
        bipartite_neighborhood: neighborhood_two_colorable(g, v),
    })
}

fn neighborhood_two_colorable(g: &TransactionGraph, v: NodeId) -> bool {
    let mut members: Vec<NodeId> = g
        .out_edges(v)
        .map(|e| e.dst)
        .chain(g.in_edges(v).map(|e| e.src))
        .chain(core::iter::once(v))
        .collect();
    members.sort_unstable();
    members.dedup();
    let index_of = |node: NodeId| members.binary_search(&node).ok();

    // undirected adjacency restricted to the neighborhood
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
    for (mi, &m) in members.iter().enumerate() {
        for e in g.out_edges(m) {
            if e.dst == m {
                continue; // self-loop cannot be 2-colored consistently; treat as stat noise
            }
            if let Some(ni) = index_of(e.dst) {
                adj[mi].push(ni);
                adj[ni].push(mi);
            }
        }
    }
    let mut color: Vec<i8> = vec![-1; members.len()];
    for start in 0..members.len() {
        if color[start] != -1 {
            continue;
        }
        color[start] = 0;
        let mut queue = vec![start];
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &w in &adj[u] {
                if color[w] == -1 {
                    color[w] = 1 - color[u];
                    queue.push(w);
                } else if color[w] == color[u] {
                    return false;
                }
            }
        }
    }
    true
}
