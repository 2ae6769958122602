//! Per-node timestamp and weight asymmetry scores over the visited set.
//!
//! The timestamp score of a node is the absolute difference between the
//! spread (max - min) of its incoming edge timestamps and the spread of its
//! outgoing ones; the weight score is the absolute difference between total
//! incoming and total outgoing amounts. Both are min-max normalized over
//! exactly the scored node set.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{NodeId, TransactionGraph};

/// Raw and normalized values for one statistic, aligned with `nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub nodes: Vec<NodeId>,
    pub raw: Vec<f64>,
    pub norm: Vec<f64>,
}

/// Timestamp and weight scores side by side, aligned with `nodes`.
#[derive(Debug, Clone)]
pub struct BehaviorScores {
    pub nodes: Vec<NodeId>,
    pub theta_raw: Vec<f64>,
    pub theta_norm: Vec<f64>,
    pub omega_raw: Vec<f64>,
    pub omega_norm: Vec<f64>,
}

/// Min-max into [0, 1]; a degenerate spread (all values equal, including a
/// single value) normalizes to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in values {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if values.is_empty() || hi <= lo {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&x| (x - lo) / (hi - lo)).collect()
}

/// Spread of edge timestamps on one side of a node. Fewer than two
/// observations means no observable spread.
fn timestamp_spread<'a>(mut timestamps: impl Iterator<Item = &'a u64>) -> u64 {
    let first = match timestamps.next() {
        Some(&t) => t,
        None => return 0,
    };
    let (mut lo, mut hi) = (first, first);
    for &t in timestamps {
        lo = lo.min(t);
        hi = hi.max(t);
    }
    hi - lo
}

/// Raw timestamp score `theta(v) = |spread_out(v) - spread_in(v)|` and its
/// normalization over `nodes`.
///
/// `nodes` must be valid ids (normally the visited set of the PPR stage).
pub fn timestamp_scores(g: &TransactionGraph, nodes: &[NodeId]) -> ScoreMap {
    let raw: Vec<f64> = nodes
        .iter()
        .map(|&v| {
            assert!((v as usize) < g.node_count(), "node {v} outside graph");
            let spread_in = timestamp_spread(g.in_edges(v).map(|e| &e.timestamp));
            let spread_out = timestamp_spread(g.out_edges(v).map(|e| &e.timestamp));
            spread_out.abs_diff(spread_in) as f64
        })
        .collect();
    let norm = min_max_normalize(&raw);
    ScoreMap { nodes: nodes.to_vec(), raw, norm }
}

/// Raw weight score `omega(v) = |sum_in(v) - sum_out(v)|` and its
/// normalization over `nodes`.
pub fn weight_scores(g: &TransactionGraph, nodes: &[NodeId]) -> ScoreMap {
    let raw: Vec<f64> = nodes
        .iter()
        .map(|&v| {
            assert!((v as usize) < g.node_count(), "node {v} outside graph");
            let w_in: f64 = g.in_edges(v).map(|e| e.weight).sum();
            let w_out: f64 = g.out_edges(v).map(|e| e.weight).sum();
            (w_in - w_out).abs()
        })
        .collect();
    let norm = min_max_normalize(&raw);
    ScoreMap { nodes: nodes.to_vec(), raw, norm }
}

/// Both statistics for the same node set.
pub fn behavior_scores(g: &TransactionGraph, nodes: &[NodeId]) -> BehaviorScores {
    let theta = timestamp_scores(g, nodes);
    let omega = weight_scores(g, nodes);
    BehaviorScores {
        nodes: theta.nodes,
        theta_raw: theta.raw,
        theta_norm: theta.norm,
        omega_raw: omega.raw,
        omega_norm: omega.norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    #[test]
    fn theta_hand_trace() {
        // v = 0: in timestamps {10, 20}, out {21, 25}
        // spread_in = 10, spread_out = 4, theta = 6
        let mut b = GraphBuilder::new();
        b.add_edge(1, 0, 1.0, 10).unwrap();
        b.add_edge(2, 0, 1.0, 20).unwrap();
        b.add_edge(0, 3, 1.0, 21).unwrap();
        b.add_edge(0, 4, 1.0, 25).unwrap();
        let g = b.build();
        let ts = timestamp_scores(&g, &[0]);
        assert_eq!(ts.raw[0], 6.0);
    }

    #[test]
    fn singleton_sides_have_zero_spread() {
        let mut b = GraphBuilder::new();
        b.add_edge(1, 0, 1.0, 100).unwrap();
        b.add_edge(0, 2, 1.0, 900).unwrap();
        let g = b.build();
        let ts = timestamp_scores(&g, &[0]);
        assert_eq!(ts.raw[0], 0.0);
    }

    #[test]
    fn normalization_of_three_values() {
        assert_eq!(min_max_normalize(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn omega_hand_trace() {
        // in weights {5, 5}, out {9} -> |10 - 9| = 1
        let mut b = GraphBuilder::new();
        b.add_edge(1, 0, 5.0, 0).unwrap();
        b.add_edge(2, 0, 5.0, 1).unwrap();
        b.add_edge(0, 3, 9.0, 2).unwrap();
        let g = b.build();
        let ws = weight_scores(&g, &[0]);
        assert_eq!(ws.raw[0], 1.0);
    }

    #[test]
    fn balanced_pass_through_is_zero() {
        let mut b = GraphBuilder::new();
        b.add_edge(1, 0, 7.0, 0).unwrap();
        b.add_edge(0, 2, 7.0, 1).unwrap();
        let g = b.build();
        let ws = weight_scores(&g, &[0]);
        assert_eq!(ws.raw[0], 0.0);
    }

    #[test]
    fn degenerate_normalization_is_all_zero() {
        let mut b = GraphBuilder::new();
        b.add_edge(0, 1, 3.0, 0).unwrap();
        b.add_edge(2, 3, 3.0, 0).unwrap();
        let g = b.build();
        // both sources have omega = 3, both sinks omega = 3
        let ws = weight_scores(&g, &[0, 2]);
        assert_eq!(ws.norm, vec![0.0, 0.0]);
    }

    #[test]
    fn timestamp_shift_invariance() {
        let edges = [(1u32, 0u32, 10u64), (2, 0, 20), (0, 3, 21), (0, 4, 60)];
        let build = |shift: u64| {
            let mut b = GraphBuilder::new();
            for &(s, d, t) in &edges {
                b.add_edge(s, d, 1.0, t + shift).unwrap();
            }
            b.build()
        };
        let a = timestamp_scores(&build(0), &[0, 1, 2, 3, 4]);
        let b = timestamp_scores(&build(1000), &[0, 1, 2, 3, 4]);
        assert_eq!(a.raw, b.raw);
    }

    #[test]
    fn weight_scale_equivariance() {
        let edges = [(1u32, 0u32, 5.0f64), (2, 0, 3.0), (0, 3, 6.0)];
        let build = |scale: f64| {
            let mut b = GraphBuilder::new();
            for &(s, d, w) in &edges {
                b.add_edge(s, d, w * scale, 0).unwrap();
            }
            b.build()
        };
        let nodes = [0, 1, 2, 3];
        let a = weight_scores(&build(1.0), &nodes);
        let b = weight_scores(&build(4.0), &nodes);
        for i in 0..nodes.len() {
            assert!((b.raw[i] - 4.0 * a.raw[i]).abs() < 1e-12);
            assert!((b.norm[i] - a.norm[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_node_set() {
        let g = GraphBuilder::new().build();
        let ts = timestamp_scores(&g, &[]);
        assert!(ts.nodes.is_empty() && ts.raw.is_empty() && ts.norm.is_empty());
    }
}
