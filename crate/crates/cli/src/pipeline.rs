//! Whole-pipeline orchestration: multi-source PageRank (optionally across a
//! worker pool), behavioral scoring, classifier training, anomaly ranking
//! and fold metrics.
//!
//! Metrics are computed on the held-out test fold of the labeled, visited
//! nodes. `K` defaults to the fold's anomaly count, which makes Recall@K
//! and Precision@K coincide.

use std::fmt::Write as _;
use std::time::Instant;

use mpo_core::anomaly::{anomaly_scores, rank_descending, AnomalyScoreSet};
use mpo_core::behavior::{behavior_scores, BehaviorScores};
use mpo_core::classify::{
    build_features, predict_f, stratified_split, train, FeatureRow, LogisticModel,
    PatternFeatureSet, SplitIndices, TrainOptions,
};
use mpo_core::graph::NodeId;
use mpo_core::metrics::{accuracy_at_k, auc, f1_score, precision_at_k, recall_at_k};
use mpo_core::ppr::{
    assemble, multi_source_ppr, single_source_ppr, PprConfig, PprScratch, PprScoreSet,
};

use crate::config::RunConfig;
use crate::formats::scores_to_maps;
use crate::ingest::Dataset;
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// PageRank mass divided by the benign-class probability.
    Full,
    /// Classifier suspicion alone (`1 / f`), no PageRank.
    NormalizedTW,
    /// Scaled PageRank mass alone, no classifier.
    RandomOnly,
}

impl EvalMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(EvalMode::Full),
            "tw" => Ok(EvalMode::NormalizedTW),
            "random" => Ok(EvalMode::RandomOnly),
            other => Err(CliError::Invalid(format!(
                "mode `{other}` is not one of full|tw|random"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Full => "full",
            EvalMode::NormalizedTW => "tw",
            EvalMode::RandomOnly => "random",
        }
    }
}

/// Multi-source PageRank across `threads` workers. Sources are split into
/// contiguous chunks; the merge happens sequentially in source order, so
/// the result is bit-identical to the single-threaded run.
pub fn ppr_parallel(
    dataset: &Dataset,
    sources: &[NodeId],
    cfg: &PprConfig,
    threads: usize,
) -> Result<PprScoreSet> {
    cfg.validate()?;
    let g = &dataset.graph;
    let mut ordered: Vec<NodeId> = sources.to_vec();
    ordered.sort_unstable();
    ordered.dedup();
    if ordered.is_empty() {
        return Ok(PprScoreSet::empty(g.node_count()));
    }
    if threads <= 1 || ordered.len() < 2 {
        return Ok(multi_source_ppr(g, &ordered, cfg)?);
    }
    let workers = threads.min(ordered.len());
    let chunk_size = ordered.len().div_ceil(workers);
    let chunks: Vec<&[NodeId]> = ordered.chunks(chunk_size).collect();
    let runs = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    let mut scratch = PprScratch::new(g.node_count());
                    chunk
                        .iter()
                        .map(|&s| single_source_ppr(g, s, cfg, &mut scratch))
                        .collect::<std::result::Result<Vec<_>, _>>()
                })
            })
            .collect();
        let mut all = Vec::with_capacity(ordered.len());
        for handle in handles {
            let chunk_runs = handle.join().expect("ppr worker panicked")?;
            all.extend(chunk_runs);
        }
        Ok::<_, mpo_core::ppr::PprError>(all)
    })?;
    Ok(assemble(g.node_count(), runs))
}

/// Everything a run produces besides files.
#[derive(Debug)]
pub struct PipelineArtifacts {
    pub pps: PprScoreSet,
    pub behavior: BehaviorScores,
    pub rows: Vec<FeatureRow>,
    pub model: Option<LogisticModel>,
    pub features: PatternFeatureSet,
    /// Mode-dependent ranking over the visited set.
    pub sas: AnomalyScoreSet,
    pub split: SplitIndices,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: String,
    pub k: usize,
    pub precision_at_k: f64,
    pub recall_at_k: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub nodes: usize,
    pub edges: usize,
    pub visited: usize,
    pub labeled_rows: usize,
    pub test_fold: usize,
    pub test_positives: usize,
    pub config_hash: String,
    pub seed: u64,
    pub dataset_id: String,
    pub wall_clock_secs: f64,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "accuracy = {}", self.accuracy);
        let _ = writeln!(out, "auc = {}", self.auc);
        let _ = writeln!(out, "config_hash = {}", self.config_hash);
        let _ = writeln!(out, "dataset_id = {}", self.dataset_id);
        let _ = writeln!(out, "edges = {}", self.edges);
        let _ = writeln!(out, "f1 = {}", self.f1);
        let _ = writeln!(out, "k = {}", self.k);
        let _ = writeln!(out, "labeled_rows = {}", self.labeled_rows);
        let _ = writeln!(out, "mode = {}", self.mode);
        let _ = writeln!(out, "nodes = {}", self.nodes);
        let _ = writeln!(out, "precision_at_k = {}", self.precision_at_k);
        let _ = writeln!(out, "recall_at_k = {}", self.recall_at_k);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "test_fold = {}", self.test_fold);
        let _ = writeln!(out, "test_positives = {}", self.test_positives);
        let _ = writeln!(out, "visited = {}", self.visited);
        let _ = writeln!(out, "wall_clock_secs = {}", self.wall_clock_secs);
        out
    }
}

/// PageRank + behavioral scores + feature rows: the shared front half.
pub struct StageOutputs {
    pub pps: PprScoreSet,
    pub behavior: BehaviorScores,
    pub rows: Vec<FeatureRow>,
}

pub fn run_front_stages(dataset: &Dataset, cfg: &RunConfig, threads: usize) -> Result<StageOutputs> {
    let sources = dataset.graph.identify_sources();
    let pps = ppr_parallel(dataset, &sources, &cfg.ppr, threads)?;
    let behavior = behavior_scores(&dataset.graph, &pps.visited);
    let (theta, omega) = scores_to_maps(&behavior);
    let rows = build_features(&theta, &omega, |v| dataset.graph.label(v))?;
    Ok(StageOutputs { pps, behavior, rows })
}

fn train_options(cfg: &RunConfig) -> TrainOptions {
    TrainOptions {
        fractions: cfg.train.fractions,
        seed: cfg.train.seed,
        iter_cap: cfg.train.iter_cap,
        ..TrainOptions::default()
    }
}

/// Rank the visited set under the given mode.
fn mode_ranking(
    mode: EvalMode,
    pps: &PprScoreSet,
    features: &PatternFeatureSet,
) -> Result<AnomalyScoreSet> {
    match mode {
        EvalMode::Full => Ok(anomaly_scores(pps, features)?),
        EvalMode::NormalizedTW => {
            let mut entries: Vec<(NodeId, f64)> = features
                .nodes
                .iter()
                .zip(features.f_values.iter())
                .map(|(&v, &f)| (v, 1.0 / f))
                .collect();
            rank_descending(&mut entries);
            Ok(AnomalyScoreSet { entries })
        }
        EvalMode::RandomOnly => {
            let mut entries: Vec<(NodeId, f64)> = pps
                .visited
                .iter()
                .map(|&v| (v, pps.aggregate_scaled[v as usize]))
                .collect();
            rank_descending(&mut entries);
            Ok(AnomalyScoreSet { entries })
        }
    }
}

/// Full evaluation run: stages, mode ranking, fold metrics.
pub fn run_pipeline(
    dataset: &Dataset,
    cfg: &RunConfig,
    mode: EvalMode,
    threads: usize,
) -> Result<PipelineArtifacts> {
    let started = Instant::now();
    let stages = run_front_stages(dataset, cfg, threads)?;
    let StageOutputs { pps, behavior, rows } = stages;

    // labeled subset drives training and evaluation
    let labeled_rows: Vec<FeatureRow> = rows.iter().copied().filter(|r| r.label.is_some()).collect();
    let labels: Vec<bool> = labeled_rows.iter().map(|r| r.label.unwrap()).collect();

    let (model, split) = match mode {
        EvalMode::RandomOnly => {
            let split = stratified_split(&labels, cfg.train.fractions, cfg.train.seed)?;
            (None, split)
        }
        _ => {
            let (model, split) = train(&labeled_rows, &train_options(cfg))?;
            (Some(model), split)
        }
    };

    // features for every visited node (identity model when none trained)
    let features = match &model {
        Some(m) => predict_f(m, &rows)?,
        None => PatternFeatureSet {
            nodes: rows.iter().map(|r| r.node).collect(),
            f_values: vec![1.0; rows.len()],
        },
    };

    let sas = mode_ranking(mode, &pps, &features)?;
    let report = fold_metrics(
        mode,
        cfg,
        dataset,
        &pps,
        &labeled_rows,
        &split,
        &sas,
        started,
    )?;

    Ok(PipelineArtifacts { pps, behavior, rows, model, features, sas, split, report })
}

#[allow(clippy::too_many_arguments)]
fn fold_metrics(
    mode: EvalMode,
    cfg: &RunConfig,
    dataset: &Dataset,
    pps: &PprScoreSet,
    labeled_rows: &[FeatureRow],
    split: &SplitIndices,
    sas: &AnomalyScoreSet,
    started: Instant,
) -> Result<EvalReport> {
    let mut sigma_of = vec![0.0f64; dataset.graph.node_count()];
    for &(v, s) in &sas.entries {
        sigma_of[v as usize] = s;
    }
    let fold_nodes: Vec<NodeId> = split.test.iter().map(|&i| labeled_rows[i].node).collect();
    let fold_scores: Vec<f64> = fold_nodes.iter().map(|&v| sigma_of[v as usize]).collect();
    let fold_labels: Vec<bool> =
        split.test.iter().map(|&i| labeled_rows[i].label.unwrap()).collect();
    let positives = fold_labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(CliError::Metrics(mpo_core::metrics::MetricsError::NoPositives));
    }

    let mut ranked: Vec<(NodeId, f64)> =
        fold_nodes.iter().copied().zip(fold_scores.iter().copied()).collect();
    rank_descending(&mut ranked);
    let ranking: Vec<NodeId> = ranked.iter().map(|&(v, _)| v).collect();

    let labels_dense: Vec<Option<bool>> = {
        let mut dense = vec![None; dataset.graph.node_count()];
        for (i, &v) in fold_nodes.iter().enumerate() {
            dense[v as usize] = Some(fold_labels[i]);
        }
        dense
    };
    let k = cfg.eval_k.unwrap_or(positives);
    if k == 0 || k > ranking.len() {
        return Err(CliError::Invalid(format!(
            "k = {k} outside 1..={} (test fold size)",
            ranking.len()
        )));
    }
    let precision = precision_at_k(&ranking, &labels_dense, k)?;
    let recall = recall_at_k(&ranking, &labels_dense, k)?;
    let accuracy = accuracy_at_k(&ranking, &labels_dense, k)?;
    let auc_value = auc(&fold_scores, &fold_labels)?;

    Ok(EvalReport {
        mode: mode.name().to_string(),
        k,
        precision_at_k: precision,
        recall_at_k: recall,
        f1: f1_score(precision, recall),
        accuracy,
        auc: auc_value,
        nodes: dataset.graph.node_count(),
        edges: dataset.graph.edge_count(),
        visited: pps.visited.len(),
        labeled_rows: labeled_rows.len(),
        test_fold: fold_nodes.len(),
        test_positives: positives,
        config_hash: cfg.config_hash(),
        seed: cfg.ppr.seed,
        dataset_id: dataset.id.clone(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AddressMap;
    use mpo_core::patterns::{pattern_graph, PatternShape, PatternSpec};

    fn dataset(nodes: u32, edges: u64, seed: u64) -> Dataset {
        let graph = pattern_graph(&PatternSpec {
            shape: PatternShape::Random { nodes, edges },
            weight_range: (1.0, 100.0),
            time_range: (0, 10_000),
            seed,
        })
        .unwrap();
        let mut addresses = AddressMap::new();
        for v in 0..graph.node_count() {
            addresses.intern(&format!("a{v}"));
        }
        Dataset { graph, addresses, id: "test".into() }
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let ds = dataset(300, 900, 5);
        let cfg = PprConfig::default();
        let sources = ds.graph.identify_sources();
        assert!(!sources.is_empty());
        let seq = ppr_parallel(&ds, &sources, &cfg, 1).unwrap();
        for threads in [2, 3, 8] {
            let par = ppr_parallel(&ds, &sources, &cfg, threads).unwrap();
            assert_eq!(seq.visited, par.visited);
            assert_eq!(seq.aggregate_raw, par.aggregate_raw);
            assert_eq!(seq.aggregate_scaled, par.aggregate_scaled);
            assert_eq!(seq.per_source.len(), par.per_source.len());
            for (a, b) in seq.per_source.iter().zip(par.per_source.iter()) {
                assert_eq!(a.source, b.source);
                assert_eq!(a.entries, b.entries);
            }
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(EvalMode::parse("full").unwrap(), EvalMode::Full);
        assert_eq!(EvalMode::parse("tw").unwrap(), EvalMode::NormalizedTW);
        assert_eq!(EvalMode::parse("random").unwrap(), EvalMode::RandomOnly);
        assert!(EvalMode::parse("both").is_err());
    }

    #[test]
    fn report_text_is_sorted_kv() {
        let report = EvalReport {
            mode: "full".into(),
            k: 3,
            precision_at_k: 1.0,
            recall_at_k: 0.5,
            f1: 2.0 / 3.0,
            accuracy: 0.9,
            auc: 0.95,
            nodes: 10,
            edges: 20,
            visited: 8,
            labeled_rows: 8,
            test_fold: 4,
            test_positives: 2,
            config_hash: "abc".into(),
            seed: 7,
            dataset_id: "d".into(),
            wall_clock_secs: 0.25,
        };
        let text = report.to_text();
        let keys: Vec<&str> =
            text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
    }
}
