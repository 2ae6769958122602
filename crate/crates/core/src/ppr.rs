//! Multi-source approximate personalized PageRank.
//!
//! Per source the engine runs three phases: a BFS that fixes the reachable
//! (optionally hop-capped) neighborhood, a forward-push sweep that settles
//! residual mass above a degree-scaled threshold, and a Monte Carlo phase
//! that spends the per-source walk budget on the residual left behind. An
//! exact power-iteration solver is included as the testing oracle; it uses
//! the same dangling-node rule as the approximate path.
//!
//! PageRank here is alpha-decay: a walk terminates at each step with
//! probability `alpha`, and the score of a node is the probability that the
//! walk ends there. Transitions are uniform over out-edges, so parallel
//! edges weight the choice by multiplicity.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;

use crate::graph::{NodeId, TransactionGraph};
use crate::rng;

/// Scaled aggregate scores are clamped to at least this, keeping every
/// visited node strictly above the unvisited ones downstream.
pub const PPR_SCALE_FLOOR: f64 = 1e-9;

/// Where a terminating walk's mass goes when it reaches a node with no
/// outgoing edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DanglingRule {
    /// The walk ends and deposits at the sink. In a transaction graph funds
    /// resting at a terminal address are part of the signal, so this is the
    /// default.
    #[default]
    Absorb,
    /// The walk jumps back to the source and continues.
    Teleport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PprConfig {
    /// Termination probability per step, in (0, 1).
    pub alpha: f64,
    /// Relative accuracy target, > 0.
    pub epsilon: f64,
    /// Failure probability in (0, 1]. `p_f = 1` reproduces the reference
    /// tuning but voids the accuracy guarantee; `p_f = 0.01` is the
    /// theoretically meaningful setting.
    pub p_f: f64,
    /// Maximum hops from the source; `None` means the full reachable set.
    pub hop_cap: Option<u32>,
    pub seed: u64,
    pub dangling: DanglingRule,
}

impl Default for PprConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            epsilon: 0.5,
            p_f: 1.0,
            hop_cap: None,
            seed: 0,
            dangling: DanglingRule::Absorb,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<(), PprError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PprError::InvalidAlpha(self.alpha));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(PprError::InvalidEpsilon(self.epsilon));
        }
        if !(self.p_f > 0.0 && self.p_f <= 1.0) {
            return Err(PprError::InvalidFailureProb(self.p_f));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PprError {
    InvalidAlpha(f64),
    InvalidEpsilon(f64),
    InvalidFailureProb(f64),
    UnknownSource(NodeId),
    OracleTooLarge { nodes: usize, cap: usize },
    OracleDidNotConverge { iterations: u32 },
}

impl fmt::Display for PprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PprError::InvalidAlpha(a) => write!(f, "alpha {a} outside (0, 1)"),
            PprError::InvalidEpsilon(e) => write!(f, "epsilon {e} must be > 0"),
            PprError::InvalidFailureProb(p) => write!(f, "p_f {p} outside (0, 1]"),
            PprError::UnknownSource(s) => write!(f, "source {s} is not a node of the graph"),
            PprError::OracleTooLarge { nodes, cap } => {
                write!(f, "exact solver limited to {cap} nodes, graph has {nodes}")
            }
            PprError::OracleDidNotConverge { iterations } => {
                write!(f, "power iteration did not converge within {iterations} iterations")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PprError {}

/// Number of Monte Carlo walks allotted to a source of out-degree `d`:
/// `ceil(((2/3)eps + 2) * max(d, 1) * ln(2 / p_f) / (eps^2 * alpha * (1 - alpha)))`.
///
/// The degree floor keeps the budget positive for sources that end up with
/// no outgoing edges after filtering.
pub fn walk_budget(out_degree: usize, cfg: &PprConfig) -> u64 {
    let d = out_degree.max(1) as f64;
    let eps = cfg.epsilon;
    let raw = ((2.0 / 3.0) * eps + 2.0) * d * libm::log(2.0 / cfg.p_f)
        / (eps * eps * cfg.alpha * (1.0 - cfg.alpha));
    let k = libm::ceil(raw);
    if k >= 1.0 {
        k as u64
    } else {
        1
    }
}

/// Dense state left by the push phase of a single source.
#[derive(Debug, Clone)]
pub struct PushOutcome {
    /// Settled score per node.
    pub scores: Vec<f64>,
    /// Unsettled residual mass per node.
    pub residuals: Vec<f64>,
}

/// Sparse scores of one source, ascending by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScores {
    pub source: NodeId,
    pub entries: Vec<(NodeId, f64)>,
}

/// Output of the full per-source run: scores plus the visited neighborhood
/// (the hop-capped reachable set), ascending by node id.
#[derive(Debug, Clone)]
pub struct SourceRun {
    pub scores: SourceScores,
    pub visited: Vec<NodeId>,
}

/// Combined result across sources.
#[derive(Debug, Clone)]
pub struct PprScoreSet {
    /// One entry per source, ascending by source id.
    pub per_source: Vec<SourceScores>,
    /// Union of per-source visited sets, ascending.
    pub visited: Vec<NodeId>,
    /// Per-node sum of per-source scores (0 for unvisited nodes).
    pub aggregate_raw: Vec<f64>,
    /// Raw aggregate min-max scaled into (0, 1] over the visited set;
    /// 0 for unvisited nodes.
    pub aggregate_scaled: Vec<f64>,
    /// Set when the engine was invoked with no sources.
    pub empty_sources: bool,
}

impl PprScoreSet {
    pub fn empty(node_count: usize) -> Self {
        Self {
            per_source: Vec::new(),
            visited: Vec::new(),
            aggregate_raw: vec![0.0; node_count],
            aggregate_scaled: vec![0.0; node_count],
            empty_sources: true,
        }
    }

    pub fn is_visited(&self, v: NodeId) -> bool {
        self.visited.binary_search(&v).is_ok()
    }
}

/// Reusable per-worker buffers. Only entries touched by a source are reset
/// between runs, so repeated calls stay cheap on large graphs.
#[derive(Debug)]
pub struct PprScratch {
    residual: Vec<f64>,
    score: Vec<f64>,
    touched: Vec<NodeId>,
    is_touched: Vec<bool>,
    dist: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<NodeId>,
    queued: Vec<bool>,
    bfs: Vec<NodeId>,
}

impl PprScratch {
    pub fn new(node_count: usize) -> Self {
        Self {
            residual: vec![0.0; node_count],
            score: vec![0.0; node_count],
            touched: Vec::new(),
            is_touched: vec![false; node_count],
            dist: vec![0; node_count],
            stamp: vec![0; node_count],
            epoch: 0,
            queue: Vec::new(),
            queued: vec![false; node_count],
            bfs: Vec::new(),
        }
    }

    #[inline]
    fn touch(&mut self, v: NodeId) {
        if !self.is_touched[v as usize] {
            self.is_touched[v as usize] = true;
            self.touched.push(v);
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
    }

    fn reset_mass(&mut self) {
        for &v in &self.touched {
            self.residual[v as usize] = 0.0;
            self.score[v as usize] = 0.0;
            self.is_touched[v as usize] = false;
        }
        self.touched.clear();
    }
}

/// BFS out from `s` up to `hop_cap`, recording distances. Returns the ball
/// in BFS order.
fn ball_phase(g: &TransactionGraph, s: NodeId, cfg: &PprConfig, scratch: &mut PprScratch) {
    scratch.next_epoch();
    scratch.bfs.clear();
    scratch.bfs.push(s);
    scratch.stamp[s as usize] = scratch.epoch;
    scratch.dist[s as usize] = 0;
    let cap = cfg.hop_cap.unwrap_or(u32::MAX);
    let mut head = 0;
    while head < scratch.bfs.len() {
        let u = scratch.bfs[head];
        head += 1;
        let du = scratch.dist[u as usize];
        if du >= cap {
            continue;
        }
        for e in g.out_edges(u) {
            let w = e.dst as usize;
            if scratch.stamp[w] != scratch.epoch {
                scratch.stamp[w] = scratch.epoch;
                scratch.dist[w] = du + 1;
                scratch.bfs.push(e.dst);
            }
        }
    }
}

#[inline]
fn push_eligible(
    g: &TransactionGraph,
    cfg: &PprConfig,
    budget: f64,
    dist: u32,
    cap: u32,
    u: NodeId,
    r: f64,
) -> bool {
    let d = g.out_degree(u);
    if d > 0 {
        dist < cap && r > d as f64 / (cfg.alpha * budget)
    } else {
        // A sink can only push under the teleport rule, where it behaves
        // like a node with a single edge back to the source.
        cfg.dangling == DanglingRule::Teleport && dist < cap && r > 1.0 / (cfg.alpha * budget)
    }
}

/// Forward push: repeatedly pick a node whose residual exceeds
/// `d(u) / (alpha * K)`, settle `alpha * r(u)` into its score and spread
/// `(1 - alpha) * r(u) / d(u)` along each out-edge.
fn push_phase(g: &TransactionGraph, s: NodeId, cfg: &PprConfig, budget: u64, scratch: &mut PprScratch) {
    let k = budget as f64;
    let cap = cfg.hop_cap.unwrap_or(u32::MAX);
    scratch.residual[s as usize] = 1.0;
    scratch.touch(s);
    scratch.queue.clear();
    if push_eligible(g, cfg, k, 0, cap, s, 1.0) {
        scratch.queue.push(s);
        scratch.queued[s as usize] = true;
    }
    while let Some(u) = scratch.queue.pop() {
        scratch.queued[u as usize] = false;
        let r_u = scratch.residual[u as usize];
        let dist_u = scratch.dist[u as usize];
        if !push_eligible(g, cfg, k, dist_u, cap, u, r_u) {
            continue;
        }
        scratch.score[u as usize] += cfg.alpha * r_u;
        scratch.residual[u as usize] = 0.0;
        let d = g.out_degree(u);
        if d > 0 {
            let share = (1.0 - cfg.alpha) * r_u / d as f64;
            for i in 0..d {
                let v = g.out_neighbor(u, i);
                scratch.touch(v);
                scratch.residual[v as usize] += share;
                if !scratch.queued[v as usize]
                    && push_eligible(
                        g,
                        cfg,
                        k,
                        scratch.dist[v as usize],
                        cap,
                        v,
                        scratch.residual[v as usize],
                    )
                {
                    scratch.queue.push(v);
                    scratch.queued[v as usize] = true;
                }
            }
        } else {
            // Teleport rule: the sink's whole onward share returns to s.
            scratch.touch(s);
            scratch.residual[s as usize] += (1.0 - cfg.alpha) * r_u;
            if !scratch.queued[s as usize]
                && push_eligible(g, cfg, k, 0, cap, s, scratch.residual[s as usize])
            {
                scratch.queue.push(s);
                scratch.queued[s as usize] = true;
            }
        }
    }
}

/// One alpha-terminating walk. Returns the node the walk ends at.
#[inline]
fn walk(
    g: &TransactionGraph,
    source: NodeId,
    start: NodeId,
    mut hops_left: Option<u32>,
    cfg: &PprConfig,
    rng_state: &mut ChaCha8Rng,
) -> NodeId {
    let mut at = start;
    loop {
        let d = g.out_degree(at);
        if d == 0 && cfg.dangling == DanglingRule::Absorb {
            return at;
        }
        if rng::unit_f64(rng_state) < cfg.alpha {
            return at;
        }
        match hops_left {
            Some(0) => return at,
            Some(ref mut h) => *h -= 1,
            None => {}
        }
        at = if d == 0 {
            source
        } else {
            g.out_neighbor(at, rng::below(rng_state, d as u64) as usize)
        };
    }
}

/// Monte Carlo phase: each node holding residual `r` launches
/// `round(r * K)` walks, each finished walk deposits `1 / K` where it ends.
fn mc_phase(g: &TransactionGraph, s: NodeId, cfg: &PprConfig, budget: u64, scratch: &mut PprScratch) {
    let k = budget as f64;
    let mut holders: Vec<NodeId> = scratch
        .touched
        .iter()
        .copied()
        .filter(|&v| scratch.residual[v as usize] > 0.0)
        .collect();
    holders.sort_unstable();
    let mut rng_state = rng::stream(cfg.seed ^ s as u64);
    let deposit = 1.0 / k;
    for v in holders {
        let walks = libm::round(scratch.residual[v as usize] * k) as u64;
        // Walks resume inside the hop cap using the BFS distance of their
        // start, keeping deposits within the visited ball.
        let hops_left = cfg.hop_cap.map(|m| m - scratch.dist[v as usize]);
        for _ in 0..walks {
            let end = walk(g, s, v, hops_left, cfg, &mut rng_state);
            scratch.touch(end);
            scratch.score[end as usize] += deposit;
        }
    }
}

/// Push phase only, materialized densely. Residual left on nodes is exactly
/// what the Monte Carlo phase would consume.
pub fn forward_push(
    g: &TransactionGraph,
    s: NodeId,
    cfg: &PprConfig,
) -> Result<PushOutcome, PprError> {
    cfg.validate()?;
    if s as usize >= g.node_count() {
        return Err(PprError::UnknownSource(s));
    }
    let mut scratch = PprScratch::new(g.node_count());
    ball_phase(g, s, cfg, &mut scratch);
    push_phase(g, s, cfg, walk_budget(g.out_degree(s), cfg), &mut scratch);
    Ok(PushOutcome { scores: scratch.score, residuals: scratch.residual })
}

/// Monte Carlo refinement over a finished push state. Deterministic for a
/// fixed seed; with all residuals zero the scores come back unchanged.
pub fn monte_carlo_refine(
    g: &TransactionGraph,
    s: NodeId,
    outcome: &PushOutcome,
    cfg: &PprConfig,
) -> Result<Vec<f64>, PprError> {
    cfg.validate()?;
    if s as usize >= g.node_count() {
        return Err(PprError::UnknownSource(s));
    }
    let mut scratch = PprScratch::new(g.node_count());
    ball_phase(g, s, cfg, &mut scratch);
    for v in 0..g.node_count() {
        if outcome.residuals[v] != 0.0 || outcome.scores[v] != 0.0 {
            scratch.touch(v as NodeId);
        }
        scratch.residual[v] = outcome.residuals[v];
        scratch.score[v] = outcome.scores[v];
    }
    mc_phase(g, s, cfg, walk_budget(g.out_degree(s), cfg), &mut scratch);
    Ok(scratch.score)
}

/// Full run for one source against reusable scratch buffers.
pub fn single_source_ppr(
    g: &TransactionGraph,
    s: NodeId,
    cfg: &PprConfig,
    scratch: &mut PprScratch,
) -> Result<SourceRun, PprError> {
    if s as usize >= g.node_count() {
        return Err(PprError::UnknownSource(s));
    }
    let budget = walk_budget(g.out_degree(s), cfg);
    ball_phase(g, s, cfg, scratch);
    push_phase(g, s, cfg, budget, scratch);
    mc_phase(g, s, cfg, budget, scratch);
    let mut entries: Vec<(NodeId, f64)> = scratch
        .touched
        .iter()
        .filter(|&&v| scratch.score[v as usize] > 0.0)
        .map(|&v| (v, scratch.score[v as usize]))
        .collect();
    entries.sort_unstable_by_key(|&(v, _)| v);
    let mut visited = scratch.bfs.clone();
    visited.sort_unstable();
    scratch.reset_mass();
    Ok(SourceRun { scores: SourceScores { source: s, entries }, visited })
}

/// Merge per-source runs (already ascending by source) into a score set.
/// The aggregate is accumulated sequentially in source order so threaded
/// and sequential drivers produce bit-identical results.
pub fn assemble(node_count: usize, runs: Vec<SourceRun>) -> PprScoreSet {
    let mut visited_mask = vec![false; node_count];
    let mut aggregate_raw = vec![0.0; node_count];
    let mut per_source = Vec::with_capacity(runs.len());
    for run in runs {
        for &v in &run.visited {
            visited_mask[v as usize] = true;
        }
        for &(v, sc) in &run.scores.entries {
            aggregate_raw[v as usize] += sc;
        }
        per_source.push(run.scores);
    }
    let visited: Vec<NodeId> = (0..node_count as NodeId)
        .filter(|&v| visited_mask[v as usize])
        .collect();

    let mut aggregate_scaled = vec![0.0; node_count];
    if !visited.is_empty() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &visited {
            let x = aggregate_raw[v as usize];
            lo = lo.min(x);
            hi = hi.max(x);
        }
        for &v in &visited {
            let x = aggregate_raw[v as usize];
            aggregate_scaled[v as usize] = if hi > lo {
                ((x - lo) / (hi - lo)).max(PPR_SCALE_FLOOR)
            } else {
                // Degenerate spread carries no ordering information; every
                // visited node sits at the top of the (0, 1] range.
                1.0
            };
        }
    }
    PprScoreSet {
        per_source,
        visited,
        aggregate_raw,
        aggregate_scaled,
        empty_sources: false,
    }
}

/// Run every source sequentially and merge. Sources are deduplicated and
/// processed in ascending order; an empty source set yields an empty score
/// set flagged with `empty_sources`.
pub fn multi_source_ppr(
    g: &TransactionGraph,
    sources: &[NodeId],
    cfg: &PprConfig,
) -> Result<PprScoreSet, PprError> {
    cfg.validate()?;
    let mut ordered: Vec<NodeId> = sources.to_vec();
    ordered.sort_unstable();
    ordered.dedup();
    for &s in &ordered {
        if s as usize >= g.node_count() {
            return Err(PprError::UnknownSource(s));
        }
    }
    if ordered.is_empty() {
        return Ok(PprScoreSet::empty(g.node_count()));
    }
    let mut scratch = PprScratch::new(g.node_count());
    let mut runs = Vec::with_capacity(ordered.len());
    for &s in &ordered {
        runs.push(single_source_ppr(g, s, cfg, &mut scratch)?);
    }
    Ok(assemble(g.node_count(), runs))
}

const ORACLE_NODE_CAP: usize = 10_000;
const ORACLE_MAX_ITERS: u32 = 100_000;
const ORACLE_TOL: f64 = 1e-12;

/// Exact PPR by power iteration: the fixed point of
/// `pi = alpha * e_s + (1 - alpha) * pi * P`, where sink rows of `P` follow
/// the chosen dangling rule (self-loop for absorb, edge to the source for
/// teleport). Intended for testing at small scale.
pub fn exact_ppr(
    g: &TransactionGraph,
    s: NodeId,
    alpha: f64,
    dangling: DanglingRule,
) -> Result<Vec<f64>, PprError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PprError::InvalidAlpha(alpha));
    }
    let n = g.node_count();
    if n > ORACLE_NODE_CAP {
        return Err(PprError::OracleTooLarge { nodes: n, cap: ORACLE_NODE_CAP });
    }
    if s as usize >= n {
        return Err(PprError::UnknownSource(s));
    }
    let mut x = vec![0.0f64; n];
    x[s as usize] = 1.0;
    let mut next = vec![0.0f64; n];
    for _ in 0..ORACLE_MAX_ITERS {
        next.fill(0.0);
        next[s as usize] = alpha;
        for u in 0..n {
            let mass = (1.0 - alpha) * x[u];
            if mass == 0.0 {
                continue;
            }
            let d = g.out_degree(u as NodeId);
            if d > 0 {
                let share = mass / d as f64;
                for e in g.out_edges(u as NodeId) {
                    next[e.dst as usize] += share;
                }
            } else {
                match dangling {
                    DanglingRule::Absorb => next[u] += mass,
                    DanglingRule::Teleport => next[s as usize] += mass,
                }
            }
        }
        let diff: f64 = x.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).sum();
        core::mem::swap(&mut x, &mut next);
        if diff < ORACLE_TOL {
            return Ok(x);
        }
    }
    Err(PprError::OracleDidNotConverge { iterations: ORACLE_MAX_ITERS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn chain3() -> TransactionGraph {
        let mut b = GraphBuilder::new();
        b.add_edge(0, 1, 1.0, 0).unwrap();
        b.add_edge(1, 2, 1.0, 1).unwrap();
        b.build()
    }

    fn cfg(seed: u64) -> PprConfig {
        PprConfig { seed, ..PprConfig::default() }
    }

    #[test]
    fn walk_budget_hand_value() {
        // d_s = 2, eps = 0.5, alpha = 0.5, p_f = 1 -> ceil(51.75...) = 52
        let c = PprConfig { epsilon: 0.5, ..PprConfig::default() };
        assert_eq!(walk_budget(2, &c), 52);
    }

    #[test]
    fn walk_budget_degree_floor_and_linearity() {
        let c = PprConfig::default();
        assert_eq!(walk_budget(0, &c), walk_budget(1, &c));
        // doubling d doubles the pre-ceiling value
        let k1 = walk_budget(3, &c) as f64;
        let k2 = walk_budget(6, &c) as f64;
        assert!((k2 - 2.0 * k1).abs() <= 2.0); // ceiling slack only
        assert!(walk_budget(0, &c) >= 1);
    }

    #[test]
    fn config_validation() {
        assert!(PprConfig { alpha: 1.5, ..PprConfig::default() }.validate().is_err());
        assert!(PprConfig { alpha: 0.0, ..PprConfig::default() }.validate().is_err());
        assert!(PprConfig { epsilon: 0.0, ..PprConfig::default() }.validate().is_err());
        assert!(PprConfig { p_f: 0.0, ..PprConfig::default() }.validate().is_err());
        assert!(PprConfig { p_f: 1.5, ..PprConfig::default() }.validate().is_err());
        assert!(PprConfig::default().validate().is_ok());
    }

    #[test]
    fn oracle_single_node() {
        let mut b = GraphBuilder::new();
        b.ensure_node(0);
        let g = b.build();
        let pi = exact_ppr(&g, 0, 0.5, DanglingRule::Absorb).unwrap();
        assert!((pi[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_two_cycle() {
        // a <-> b, s = a, alpha = 0.5 -> pi(a) = 2/3, pi(b) = 1/3
        let mut b = GraphBuilder::new();
        b.add_edge(0, 1, 1.0, 0).unwrap();
        b.add_edge(1, 0, 1.0, 1).unwrap();
        let g = b.build();
        let pi = exact_ppr(&g, 0, 0.5, DanglingRule::Absorb).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_chain_with_absorbing_tail() {
        // a -> b -> c, alpha = 0.5: pi = (0.5, 0.25, 0.25)
        let g = chain3();
        let pi = exact_ppr(&g, 0, 0.5, DanglingRule::Absorb).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-9);
        assert!((pi[1] - 0.25).abs() < 1e-9);
        assert!((pi[2] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn oracle_mass_sums_to_one() {
        let g = chain3();
        for rule in [DanglingRule::Absorb, DanglingRule::Teleport] {
            let pi = exact_ppr(&g, 0, 0.35, rule).unwrap();
            let total: f64 = pi.iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "rule {rule:?} total {total}");
        }
    }

    #[test]
    fn push_conserves_mass() {
        let g = chain3();
        let out = forward_push(&g, 0, &cfg(1)).unwrap();
        let total: f64 = out.scores.iter().sum::<f64>() + out.residuals.iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn push_threshold_met() {
        let g = chain3();
        let c = cfg(1);
        let k = walk_budget(g.out_degree(0), &c) as f64;
        let out = forward_push(&g, 0, &c).unwrap();
        for v in 0..3u32 {
            let d = g.out_degree(v);
            if d > 0 {
                assert!(
                    out.residuals[v as usize] <= d as f64 / (c.alpha * k) + 1e-15,
                    "node {v} residual above threshold"
                );
            }
        }
    }

    #[test]
    fn isolated_source_keeps_residual() {
        let mut b = GraphBuilder::new();
        b.ensure_node(0);
        let g = b.build();
        let out = forward_push(&g, 0, &cfg(5)).unwrap();
        assert_eq!(out.residuals[0], 1.0);
        assert!(out.scores.iter().all(|&x| x == 0.0));
        // every walk deposits at the isolated source: score converges to 1
        let refined = monte_carlo_refine(&g, 0, &out, &cfg(5)).unwrap();
        assert!((refined[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn refine_without_residual_is_identity() {
        let g = chain3();
        let out = PushOutcome { scores: vec![0.3, 0.2, 0.1], residuals: vec![0.0; 3] };
        let refined = monte_carlo_refine(&g, 0, &out, &cfg(2)).unwrap();
        assert_eq!(refined, vec![0.3, 0.2, 0.1]);
    }

    #[test]
    fn fixed_seed_reproduces_scores() {
        let g = chain3();
        let a = multi_source_ppr(&g, &[0], &cfg(11)).unwrap();
        let b = multi_source_ppr(&g, &[0], &cfg(11)).unwrap();
        assert_eq!(a.per_source[0].entries, b.per_source[0].entries);
        assert_eq!(a.aggregate_raw, b.aggregate_raw);
    }

    #[test]
    fn empty_sources_flagged() {
        let g = chain3();
        let set = multi_source_ppr(&g, &[], &cfg(0)).unwrap();
        assert!(set.empty_sources);
        assert!(set.visited.is_empty());
        assert!(set.per_source.is_empty());
    }

    #[test]
    fn unknown_source_rejected() {
        let g = chain3();
        assert!(matches!(
            multi_source_ppr(&g, &[7], &cfg(0)),
            Err(PprError::UnknownSource(7))
        ));
    }

    #[test]
    fn disjoint_chains_aggregate_is_union() {
        // 0->1 and 2->3 with sources {0, 2}
        let mut b = GraphBuilder::new();
        b.add_edge(0, 1, 1.0, 0).unwrap();
        b.add_edge(2, 3, 1.0, 0).unwrap();
        let g = b.build();
        let set = multi_source_ppr(&g, &[0, 2], &cfg(3)).unwrap();
        for run in &set.per_source {
            for &(v, sc) in &run.entries {
                assert!(
                    (set.aggregate_raw[v as usize] - sc).abs() < 1e-15,
                    "disjoint runs must not overlap"
                );
            }
        }
    }

    #[test]
    fn visited_superset_of_scored_and_sorted() {
        let g = chain3();
        let set = multi_source_ppr(&g, &[0], &cfg(4)).unwrap();
        assert_eq!(set.visited, vec![0, 1, 2]);
        for run in &set.per_source {
            for &(v, _) in &run.entries {
                assert!(set.is_visited(v));
            }
        }
    }

    #[test]
    fn hop_cap_limits_ball() {
        let g = chain3();
        let capped = multi_source_ppr(
            &g,
            &[0],
            &PprConfig { hop_cap: Some(1), ..cfg(5) },
        )
        .unwrap();
        assert_eq!(capped.visited, vec![0, 1]);
        let open = multi_source_ppr(&g, &[0], &cfg(5)).unwrap();
        assert_eq!(open.visited, vec![0, 1, 2]);
    }

    #[test]
    fn scaled_aggregate_in_unit_range() {
        let g = chain3();
        let set = multi_source_ppr(&g, &[0], &cfg(6)).unwrap();
        for &v in &set.visited {
            let x = set.aggregate_scaled[v as usize];
            assert!(x >= PPR_SCALE_FLOOR && x <= 1.0, "scaled {x} out of range");
        }
        let hi = set
            .visited
            .iter()
            .map(|&v| set.aggregate_scaled[v as usize])
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn approx_close_to_oracle_on_chain() {
        let g = chain3();
        let c = PprConfig { epsilon: 0.1, p_f: 0.01, ..cfg(7) };
        let set = multi_source_ppr(&g, &[0], &c).unwrap();
        let exact = exact_ppr(&g, 0, c.alpha, c.dangling).unwrap();
        for (v, pi) in exact.iter().enumerate() {
            let approx = set
                .per_source[0]
                .entries
                .iter()
                .find(|(n, _)| *n == v as u32)
                .map(|(_, s)| *s)
                .unwrap_or(0.0);
            assert!(
                (approx - pi).abs() <= c.epsilon * pi,
                "node {v}: approx {approx} exact {pi}"
            );
        }
    }
}
