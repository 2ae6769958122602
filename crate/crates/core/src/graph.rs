//! Directed multigraph of transactions with CSR adjacency in both directions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Dense node index. External string addresses are mapped to contiguous ids
/// `0..node_count` at ingestion time; the mapping lives with the IO layer.
pub type NodeId = u32;

/// A single transaction: money moves `src -> dst` at `timestamp`.
///
/// Parallel edges between the same pair are permitted and preserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    /// Transferred amount, non-negative.
    pub weight: f64,
    /// Dataset time step or epoch seconds.
    pub timestamp: u64,
}

/// Whether degree-style statistics sum edge weights or count edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegreeMode {
    /// Sum of incident edge weights (default; feeds downstream scoring).
    #[default]
    Weighted,
    /// Plain edge counts (the set-cardinality form).
    Count,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    UnknownNode(NodeId),
    InvalidWeight { src: NodeId, dst: NodeId, weight: f64 },
    LabelOutOfRange { node: NodeId, node_count: usize },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::UnknownNode(v) => write!(f, "unknown node id {v}"),
            GraphError::InvalidWeight { src, dst, weight } => {
                write!(f, "edge {src}->{dst} has invalid weight {weight} (must be finite and >= 0)")
            }
            GraphError::LabelOutOfRange { node, node_count } => {
                write!(f, "label for node {node} outside graph of {node_count} nodes")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GraphError {}

/// Accumulates edges (and isolated nodes) before freezing into a
/// [`TransactionGraph`]. Edge insertion order is preserved.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    edges: Vec<Edge>,
    node_count: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        let mut b = Self { edges: Vec::with_capacity(edges), node_count: 0 };
        b.node_count = nodes;
        b
    }

    /// Makes sure `id` exists even if no edge touches it (label-only nodes
    /// are admitted as isolated nodes).
    pub fn ensure_node(&mut self, id: NodeId) {
        self.node_count = self.node_count.max(id as usize + 1);
    }

    pub fn add_edge(
        &mut self,
        src: NodeId,
        dst: NodeId,
        weight: f64,
        timestamp: u64,
    ) -> Result<(), GraphError> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(GraphError::InvalidWeight { src, dst, weight });
        }
        self.ensure_node(src);
        self.ensure_node(dst);
        self.edges.push(Edge { src, dst, weight, timestamp });
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn build(self) -> TransactionGraph {
        TransactionGraph::from_edges(self.node_count, self.edges)
    }
}

/// Immutable directed multigraph with per-edge weight and timestamp.
///
/// Both adjacency directions are stored as CSR indices into one shared edge
/// array; within each adjacency list the original insertion order is kept.
/// The structure is read-only after construction and safe to share across
/// worker threads.
#[derive(Debug, Clone)]
pub struct TransactionGraph {
    node_count: usize,
    edges: Vec<Edge>,
    out_offsets: Vec<u32>,
    out_edges: Vec<u32>,
    in_offsets: Vec<u32>,
    in_edges: Vec<u32>,
    /// Optional ground truth, `Some(true)` = illicit. Empty when unlabeled.
    labels: Vec<Option<bool>>,
}

impl TransactionGraph {
    pub fn from_edges(node_count: usize, edges: Vec<Edge>) -> Self {
        let node_count = edges
            .iter()
            .map(|e| (e.src.max(e.dst) as usize) + 1)
            .max()
            .unwrap_or(0)
            .max(node_count);
        let (out_offsets, out_edges) = csr_index(node_count, &edges, |e| e.src);
        let (in_offsets, in_edges) = csr_index(node_count, &edges, |e| e.dst);
        Self {
            node_count,
            edges,
            out_offsets,
            out_edges,
            in_offsets,
            in_edges,
            labels: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    fn check(&self, v: NodeId) -> Result<(), GraphError> {
        if (v as usize) < self.node_count {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(v))
        }
    }

    #[inline]
    pub fn out_degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        (self.out_offsets[v + 1] - self.out_offsets[v]) as usize
    }

    #[inline]
    pub fn in_degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        (self.in_offsets[v + 1] - self.in_offsets[v]) as usize
    }

    /// Outgoing edges of `v` in insertion order.
    #[inline]
    pub fn out_edges(&self, v: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        let v = v as usize;
        self.out_edges[self.out_offsets[v] as usize..self.out_offsets[v + 1] as usize]
            .iter()
            .map(move |&i| &self.edges[i as usize])
    }

    /// Incoming edges of `v` in insertion order.
    #[inline]
    pub fn in_edges(&self, v: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        let v = v as usize;
        self.in_edges[self.in_offsets[v] as usize..self.in_offsets[v + 1] as usize]
            .iter()
            .map(move |&i| &self.edges[i as usize])
    }

    /// Destination of the `i`-th outgoing edge of `v` (0-based, insertion
    /// order). Used by the random-walk kernel; `i` must be `< out_degree(v)`.
    #[inline]
    pub fn out_neighbor(&self, v: NodeId, i: usize) -> NodeId {
        let at = self.out_offsets[v as usize] as usize + i;
        self.edges[self.out_edges[at] as usize].dst
    }

    /// Nodes that initiate but never receive: in-degree 0 and out-degree > 0.
    /// Isolated nodes are excluded. Result is ascending.
    pub fn identify_sources(&self) -> Vec<NodeId> {
        (0..self.node_count as NodeId)
            .filter(|&v| self.in_degree(v) == 0 && self.out_degree(v) > 0)
            .collect()
    }

    /// Sum (or count) of incoming edge weights.
    pub fn fan_in(&self, v: NodeId, mode: DegreeMode) -> Result<f64, GraphError> {
        self.check(v)?;
        Ok(match mode {
            DegreeMode::Weighted => self.in_edges(v).map(|e| e.weight).sum(),
            DegreeMode::Count => self.in_degree(v) as f64,
        })
    }

    /// Sum (or count) of outgoing edge weights.
    pub fn fan_out(&self, v: NodeId, mode: DegreeMode) -> Result<f64, GraphError> {
        self.check(v)?;
        Ok(match mode {
            DegreeMode::Weighted => self.out_edges(v).map(|e| e.weight).sum(),
            DegreeMode::Count => self.out_degree(v) as f64,
        })
    }

    /// `fan_in(v) + fan_out(v)`.
    pub fn gather_scatter(&self, v: NodeId, mode: DegreeMode) -> Result<f64, GraphError> {
        Ok(self.fan_in(v, mode)? + self.fan_out(v, mode)?)
    }

    pub fn set_labels(&mut self, labels: Vec<(NodeId, bool)>) -> Result<(), GraphError> {
        if self.labels.is_empty() {
            self.labels = vec![None; self.node_count];
        }
        for (v, illicit) in labels {
            if v as usize >= self.node_count {
                return Err(GraphError::LabelOutOfRange { node: v, node_count: self.node_count });
            }
            self.labels[v as usize] = Some(illicit);
        }
        Ok(())
    }

    #[inline]
    pub fn label(&self, v: NodeId) -> Option<bool> {
        self.labels.get(v as usize).copied().flatten()
    }

    pub fn has_labels(&self) -> bool {
        !self.labels.is_empty()
    }

    /// Count of nodes labeled illicit.
    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Some(true)).count()
    }

    /// Short description for error messages and manifests.
    pub fn summary(&self) -> String {
        format!("{} nodes, {} edges", self.node_count, self.edges.len())
    }
}

/// Stable counting sort of edge indices by `key`, producing offsets + the
/// edge-index array. Stability keeps insertion order within each list.
fn csr_index(
    node_count: usize,
    edges: &[Edge],
    key: impl Fn(&Edge) -> NodeId,
) -> (Vec<u32>, Vec<u32>) {
    let mut offsets = vec![0u32; node_count + 1];
    for e in edges {
        offsets[key(e) as usize + 1] += 1;
    }
    for i in 0..node_count {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor: Vec<u32> = offsets[..node_count].to_vec();
    let mut index = vec![0u32; edges.len()];
    for (i, e) in edges.iter().enumerate() {
        let k = key(e) as usize;
        index[cursor[k] as usize] = i as u32;
        cursor[k] += 1;
    }
    (offsets, index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TransactionGraph {
        // a=0, b=1, c=2
        let mut b = GraphBuilder::new();
        b.add_edge(0, 1, 1.0, 10).unwrap();
        b.add_edge(1, 2, 2.0, 20).unwrap();
        b.add_edge(0, 2, 3.0, 15).unwrap();
        b.build()
    }

    #[test]
    fn builds_three_row_graph() {
        let g = toy();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn empty_graph() {
        let g = GraphBuilder::new().build();
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.edge_count(), 0);
        assert!(g.identify_sources().is_empty());
    }

    #[test]
    fn rejects_negative_weight() {
        let mut b = GraphBuilder::new();
        let err = b.add_edge(0, 1, -1.0, 5).unwrap_err();
        assert!(matches!(err, GraphError::InvalidWeight { .. }));
    }

    #[test]
    fn sources_chain_cycle_star() {
        let g = toy(); // chain-ish: a->b->c plus a->c
        assert_eq!(g.identify_sources(), vec![0]);

        let mut b = GraphBuilder::new();
        b.add_edge(0, 1, 1.0, 0).unwrap();
        b.add_edge(1, 0, 1.0, 1).unwrap();
        let cycle = b.build();
        assert!(cycle.identify_sources().is_empty());

        let mut b = GraphBuilder::new();
        for leaf in 1..4 {
            b.add_edge(0, leaf, 1.0, 0).unwrap();
        }
        let star = b.build();
        assert_eq!(star.identify_sources(), vec![0]);
    }

    #[test]
    fn isolated_node_not_a_source() {
        let mut b = GraphBuilder::new();
        b.add_edge(0, 1, 1.0, 0).unwrap();
        b.ensure_node(5);
        let g = b.build();
        assert_eq!(g.node_count(), 6);
        assert_eq!(g.identify_sources(), vec![0]);
        assert_eq!(g.fan_in(5, DegreeMode::Weighted).unwrap(), 0.0);
        assert_eq!(g.gather_scatter(5, DegreeMode::Weighted).unwrap(), 0.0);
    }

    #[test]
    fn fan_sums() {
        // v=1 with in weights {2,3}, out weights {4}
        let mut b = GraphBuilder::new();
        b.add_edge(0, 1, 2.0, 0).unwrap();
        b.add_edge(2, 1, 3.0, 1).unwrap();
        b.add_edge(1, 3, 4.0, 2).unwrap();
        let g = b.build();
        assert_eq!(g.fan_in(1, DegreeMode::Weighted).unwrap(), 5.0);
        assert_eq!(g.fan_out(1, DegreeMode::Weighted).unwrap(), 4.0);
        assert_eq!(g.gather_scatter(1, DegreeMode::Weighted).unwrap(), 9.0);
        // count variant: 3 in-edges regardless of weight
        let mut b = GraphBuilder::new();
        b.add_edge(0, 3, 7.0, 0).unwrap();
        b.add_edge(1, 3, 9.0, 0).unwrap();
        b.add_edge(2, 3, 0.5, 0).unwrap();
        let g = b.build();
        assert_eq!(g.fan_in(3, DegreeMode::Count).unwrap(), 3.0);
    }

    #[test]
    fn unknown_node_errors() {
        let g = toy();
        assert!(matches!(g.fan_in(9, DegreeMode::Weighted), Err(GraphError::UnknownNode(9))));
    }

    #[test]
    fn parallel_edges_preserved_in_order() {
        let mut b = GraphBuilder::new();
        b.add_edge(0, 1, 1.0, 5).unwrap();
        b.add_edge(0, 1, 2.0, 3).unwrap();
        b.add_edge(0, 2, 9.0, 1).unwrap();
        let g = b.build();
        let ws: Vec<f64> = g.out_edges(0).map(|e| e.weight).collect();
        assert_eq!(ws, vec![1.0, 2.0, 9.0]);
        assert_eq!(g.out_degree(0), 3);
        assert_eq!(g.in_degree(1), 2);
    }

    #[test]
    fn degree_totals_match_edge_totals() {
        let g = toy();
        let total_w: f64 = g.edges().iter().map(|e| e.weight).sum();
        let fan_in_sum: f64 =
            (0..3).map(|v| g.fan_in(v, DegreeMode::Weighted).unwrap()).sum();
        let fan_out_sum: f64 =
            (0..3).map(|v| g.fan_out(v, DegreeMode::Weighted).unwrap()).sum();
        assert!((fan_in_sum - total_w).abs() < 1e-12);
        assert!((fan_out_sum - total_w).abs() < 1e-12);
        let in_cnt: usize = (0..3).map(|v| g.in_degree(v)).sum();
        let out_cnt: usize = (0..3).map(|v| g.out_degree(v)).sum();
        assert_eq!(in_cnt, g.edge_count());
        assert_eq!(out_cnt, g.edge_count());
    }

    #[test]
    fn labels_roundtrip() {
        let mut g = toy();
        assert!(!g.has_labels());
        g.set_labels(vec![(2, true), (0, false)]).unwrap();
        assert_eq!(g.label(2), Some(true));
        assert_eq!(g.label(0), Some(false));
        assert_eq!(g.label(1), None);
        assert_eq!(g.positive_count(), 1);
        assert!(g.set_labels(vec![(7, true)]).is_err());
    }
}
