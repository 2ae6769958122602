//! Temporary exploration harness (deleted once the benchmark is pinned).

use std::collections::BTreeMap;
use std::path::PathBuf;

use mpo_cli::config::{parse_kv, RunConfig};
use mpo_cli::pipeline::{run_pipeline, EvalMode};
use mpo_cli::synth::parse_manifest;

fn manifest() -> mpo_cli::synth::SynthManifest {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/synthetic.cfg");
    let text = std::fs::read_to_string(&path).unwrap();
    let map = parse_kv(&text, &path).unwrap();
    parse_manifest(&map).unwrap()
}

#[test]
#[ignore]
fn seed_sweep() {
    let (dataset, records) = manifest().build().unwrap();
    let injected: usize = records.iter().map(|r| r.injected_nodes.len()).sum();
    let labels: Vec<Option<bool>> = (0..dataset.graph.node_count() as u32)
        .map(|v| dataset.graph.label(v))
        .collect();
    for seed in 1..=12u64 {
        let mut cfg = RunConfig::default();
        cfg.apply(&BTreeMap::from([
            ("ppr.seed".to_string(), seed.to_string()),
            ("train.seed".to_string(), seed.to_string()),
            ("ppr.epsilon".to_string(), "0.25".to_string()),
        ]))
        .unwrap();
        let full_art = run_pipeline(&dataset, &cfg, EvalMode::Full, 1).unwrap();
        let full = &full_art.report;
        let tw = run_pipeline(&dataset, &cfg, EvalMode::NormalizedTW, 1).unwrap().report;
        let random = run_pipeline(&dataset, &cfg, EvalMode::RandomOnly, 1).unwrap().report;
        // global recall@K with K = number of injected nodes
        let ranking: Vec<u32> = full_art.sas.entries.iter().map(|&(v, _)| v).collect();
        let global_recall =
            mpo_core::metrics::recall_at_k(&ranking, &labels, injected).unwrap();
        println!(
            "seed {seed:>2}: fold-recall {:.3} global-recall@{injected} {:.3} | AUC full {:.4} tw {:.4} random {:.4} | margins {:+.4} {:+.4}",
            full.recall_at_k,
            global_recall,
            full.auc,
            tw.auc,
            random.auc,
            full.auc - tw.auc,
            full.auc - random.auc,
        );
    }
}

#[test]
#[ignore]
fn explore_benchmark() {
    let (dataset, records) = manifest().build().unwrap();
    let injected: usize = records.iter().map(|r| r.injected_nodes.len()).sum();
    println!(
        "benchmark: {} | positives {} | injected {}",
        dataset.graph.summary(),
        dataset.graph.positive_count(),
        injected
    );
    println!("sources: {}", dataset.graph.identify_sources().len());

    let mut cfg = RunConfig::default();
    cfg.apply(&BTreeMap::from([
        ("ppr.seed".to_string(), "42".to_string()),
        ("ppr.epsilon".to_string(), "0.25".to_string()),
        ("train.seed".to_string(), "42".to_string()),
    ]))
    .unwrap();

    for mode in [EvalMode::Full, EvalMode::NormalizedTW, EvalMode::RandomOnly] {
        let t = std::time::Instant::now();
        let art = run_pipeline(&dataset, &cfg, mode, 1).unwrap();
        println!(
            "mode {:>6}: P@K {:.3} R@K {:.3} F1 {:.3} ACC {:.3} AUC {:.3} (k={}, fold={}, pos={}) visited={} [{:.2}s]",
            mode.name(),
            art.report.precision_at_k,
            art.report.recall_at_k,
            art.report.f1,
            art.report.accuracy,
            art.report.auc,
            art.report.k,
            art.report.test_fold,
            art.report.test_positives,
            art.report.visited,
            t.elapsed().as_secs_f64(),
        );

        if mode != EvalMode::Full {
            continue;
        }
        // diagnose: where do fold positives sit in the fold ranking?
        let labeled: Vec<_> = art.rows.iter().filter(|r| r.label.is_some()).collect();
        let fold: Vec<_> = art.split.test.iter().map(|&i| labeled[i]).collect();
        let mut sigma_of = vec![0.0; dataset.graph.node_count()];
        for &(v, s) in &art.sas.entries {
            sigma_of[v as usize] = s;
        }
        let mut ranked: Vec<_> = fold
            .iter()
            .map(|r| (r.node, sigma_of[r.node as usize], r.label.unwrap(), r.features))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        println!("-- fold top 12:");
        for (i, (v, s, l, f)) in ranked.iter().take(12).enumerate() {
            let role = records
                .iter()
                .find(|r| r.injected_nodes.contains(v))
                .map(|r| format!("{:?}", r.spec.shape))
                .unwrap_or_default();
            println!(
                "   #{:<3} node {:<5} sigma {:>12.4} pos={} feats=[{:.3},{:.3}] {role}",
                i + 1, v, s, l, f[0], f[1]
            );
        }
        println!("-- fold positives:");
        for (i, (v, s, l, f)) in ranked.iter().enumerate() {
            if *l {
                let role = records
                    .iter()
                    .find(|r| r.injected_nodes.contains(v))
                    .map(|r| format!("{:?}", r.spec.shape))
                    .unwrap_or_default();
                println!(
                    "   #{:<3} node {:<5} sigma {:>12.4} feats=[{:.3},{:.3}] pi={:.4} {role}",
                    i + 1, v, s, f[0], f[1], art.pps.aggregate_scaled[*v as usize]
                );
            }
        }
        // global view: rank of every injected node in the full ranking
        let mut global_rank = vec![usize::MAX; dataset.graph.node_count()];
        for (i, &(v, _)) in art.sas.entries.iter().enumerate() {
            global_rank[v as usize] = i + 1;
        }
        for rec in &records {
            let mut ranks: Vec<usize> =
                rec.injected_nodes.iter().map(|&v| global_rank[v as usize]).collect();
            ranks.sort_unstable();
            println!("   {:?} global ranks: {:?}", rec.spec.shape, ranks);
        }
    }
}
