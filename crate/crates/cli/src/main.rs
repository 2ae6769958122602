//! `mpo` — transaction-graph anomaly detection pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mpo_cli::adapters::{load_dataset, AdapterKind};
use mpo_cli::config::{parse_dangling, resolve_threads, RunConfig};
use mpo_cli::formats;
use mpo_cli::ingest::{ensure_out_dir, ingest_edge_list, load_graph_dir, write_graph_dir};
use mpo_cli::pipeline::{run_front_stages, run_pipeline, EvalMode};
use mpo_cli::synth::{parse_manifest, write_benchmark};
use mpo_cli::{fnv64, CliError};

#[derive(Parser)]
#[command(
    name = "mpo",
    version,
    about = "Multi-pattern transaction-graph anomaly detection",
    long_about = "Ranks accounts of a directed, weighted, timestamped transaction graph by \
                  laundering suspicion: multi-source personalized PageRank, timestamp/weight \
                  behavioral scores, logistic-regression fusion, and an anomaly score."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every PageRank-running subcommand.
#[derive(Args, Debug, Clone)]
struct PprFlags {
    /// Termination probability per walk step, in (0,1)
    #[arg(long)]
    alpha: Option<f64>,
    /// Relative accuracy target
    #[arg(long)]
    epsilon: Option<f64>,
    /// Failure probability in (0,1]
    #[arg(long = "p-f")]
    p_f: Option<f64>,
    /// Maximum hops from each source (unbounded when absent)
    #[arg(long = "hop-cap")]
    hop_cap: Option<u32>,
    /// RNG seed for walks and splits
    #[arg(long)]
    seed: Option<u64>,
    /// Dangling-node rule: absorb | teleport
    #[arg(long)]
    dangling: Option<String>,
    /// Worker threads (falls back to MPO_THREADS, then config)
    #[arg(long)]
    threads: Option<usize>,
    /// Flat key-value config file
    #[arg(long)]
    config: Option<PathBuf>,
}

impl PprFlags {
    fn overrides(&self) -> mpo_cli::Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        if let Some(a) = self.alpha {
            map.insert("ppr.alpha".into(), a.to_string());
        }
        if let Some(e) = self.epsilon {
            map.insert("ppr.epsilon".into(), e.to_string());
        }
        if let Some(p) = self.p_f {
            map.insert("ppr.p_f".into(), p.to_string());
        }
        if let Some(h) = self.hop_cap {
            map.insert("ppr.hop_cap".into(), h.to_string());
        }
        if let Some(s) = self.seed {
            map.insert("ppr.seed".into(), s.to_string());
            map.insert("train.seed".into(), s.to_string());
        }
        if let Some(d) = &self.dangling {
            parse_dangling("--dangling", d)?;
            map.insert("ppr.dangling_rule".into(), d.clone());
        }
        Ok(map)
    }

    fn resolve(&self) -> mpo_cli::Result<(RunConfig, usize)> {
        let cfg = RunConfig::resolve(self.config.as_deref(), &self.overrides()?)?;
        let threads = resolve_threads(self.threads, &cfg)?;
        Ok((cfg, threads))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ingest an edge list (and optional labels) into a graph directory
    Ingest {
        /// Edge-list CSV (or adapter-specific file/directory)
        input: PathBuf,
        /// Label file `address,label`
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Dataset layout: generic | ellipticpp | ethereum | wormhole
        #[arg(long, default_value = "generic")]
        adapter: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Flat key-value config file (adapter.* overrides)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Multi-source personalized PageRank; dumps scores and visited nodes
    Ppr {
        graph_dir: PathBuf,
        #[command(flatten)]
        flags: PprFlags,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Behavioral timestamp/weight scores over a visited-node set
    Score {
        graph_dir: PathBuf,
        /// Visited-node list (one id per line) from the ppr stage
        #[arg(long)]
        svn: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the pattern classifier on a behavioral score dump
    Train {
        /// Score dump from the score stage
        features: PathBuf,
        /// Graph directory carrying the labels
        #[arg(long)]
        graph: PathBuf,
        /// train,val,test fractions
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rank suspects with a trained model
    Detect {
        graph_dir: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Report size
        #[arg(short, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        #[command(flatten)]
        flags: PprFlags,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the whole pipeline and report fold metrics
    Eval {
        graph_dir: PathBuf,
        /// full | tw | random
        #[arg(long, default_value = "full")]
        mode: String,
        /// Metrics cutoff (defaults to the fold's anomaly count)
        #[arg(short, value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
        #[command(flatten)]
        flags: PprFlags,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate a labeled synthetic benchmark from a manifest
    Synth {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn write_resolved(dir: &Path, cfg: &RunConfig) -> mpo_cli::Result<()> {
    let path = dir.join("resolved.cfg");
    std::fs::write(&path, cfg.to_text()).map_err(|e| CliError::io(&path, e))
}

fn run(cli: Cli) -> mpo_cli::Result<()> {
    match cli.command {
        Command::Ingest { input, labels, adapter, output, config } => {
            let kind = AdapterKind::parse(&adapter)?;
            let overrides = match config.as_deref() {
                Some(path) => mpo_cli::config::read_kv_file(path)?
                    .into_iter()
                    .filter(|(k, _)| k.starts_with("adapter."))
                    .collect(),
                None => BTreeMap::new(),
            };
            let dataset = match (kind, labels) {
                (AdapterKind::Generic, labels) => {
                    ingest_edge_list(&input, labels.as_deref())?
                }
                (_, Some(_)) => {
                    return Err(CliError::Invalid(
                        "--labels applies to the generic adapter only; \
                         other adapters locate their own label files"
                            .into(),
                    ))
                }
                (kind, None) => load_dataset(kind, &input, &overrides)?,
            };
            let out = ensure_out_dir(&output)?;
            write_graph_dir(&out, &dataset)?;
            write_resolved(&out, &RunConfig::default())?;
            eprintln!("ingested {} -> {}", dataset.graph.summary(), out.display());
            Ok(())
        }
        Command::Ppr { graph_dir, flags, output } => {
            let (cfg, threads) = flags.resolve()?;
            let dataset = load_graph_dir(&graph_dir)?;
            let sources = dataset.graph.identify_sources();
            let pps = mpo_cli::pipeline::ppr_parallel(&dataset, &sources, &cfg.ppr, threads)?;
            if pps.empty_sources {
                eprintln!("warning: graph has no zero-in-degree sources; scores are empty");
            }
            let out = ensure_out_dir(&output)?;
            formats::write_sps(&out.join("sps.csv"), &pps)?;
            formats::write_svn(&out.join("svn.csv"), &pps)?;
            write_resolved(&out, &cfg)?;
            eprintln!(
                "ppr over {} sources -> {} visited nodes",
                pps.per_source.len(),
                pps.visited.len()
            );
            Ok(())
        }
        Command::Score { graph_dir, svn, output, config } => {
            let cfg = RunConfig::resolve(config.as_deref(), &BTreeMap::new())?;
            let dataset = load_graph_dir(&graph_dir)?;
            let nodes = formats::read_svn(&svn)?;
            for &v in &nodes {
                if v as usize >= dataset.graph.node_count() {
                    return Err(CliError::UnknownNode(v));
                }
            }
            let bs = mpo_core::behavior::behavior_scores(&dataset.graph, &nodes);
            let out = ensure_out_dir(&output)?;
            formats::write_scores(&out.join("scores.csv"), &bs)?;
            write_resolved(&out, &cfg)?;
            eprintln!("scored {} nodes", bs.nodes.len());
            Ok(())
        }
        Command::Train { features, graph, split, seed, output, config } => {
            let mut overrides = BTreeMap::new();
            if let Some(s) = split {
                overrides.insert("train.split".into(), s);
            }
            if let Some(s) = seed {
                overrides.insert("train.seed".into(), s.to_string());
            }
            let cfg = RunConfig::resolve(config.as_deref(), &overrides)?;
            let dataset = load_graph_dir(&graph)?;
            let bs = formats::read_scores(&features)?;
            let (theta, omega) = formats::scores_to_maps(&bs);
            let rows = mpo_core::classify::build_features(&theta, &omega, |v| {
                dataset.graph.label(v)
            })?;
            let labeled: Vec<_> = rows.into_iter().filter(|r| r.label.is_some()).collect();
            let opts = mpo_core::classify::TrainOptions {
                fractions: cfg.train.fractions,
                seed: cfg.train.seed,
                iter_cap: cfg.train.iter_cap,
                ..Default::default()
            };
            let (model, split_idx) = mpo_core::classify::train(&labeled, &opts)?;
            let out = ensure_out_dir(&output)?;
            formats::write_model(&out.join("model.txt"), &model)?;
            write_resolved(&out, &cfg)?;
            eprintln!(
                "trained on {} rows (val {}, test {}), reg_strength {}",
                split_idx.train.len(),
                split_idx.val.len(),
                split_idx.test.len(),
                model.reg_strength
            );
            Ok(())
        }
        Command::Detect { graph_dir, model, k, flags, output } => {
            let (cfg, threads) = flags.resolve()?;
            let dataset = load_graph_dir(&graph_dir)?;
            let model = formats::read_model(&model)?;
            let stages = run_front_stages(&dataset, &cfg, threads)?;
            let features = mpo_core::classify::predict_f(&model, &stages.rows)?;
            let sas = mpo_core::anomaly::anomaly_scores(&stages.pps, &features)?;
            let k = k as usize;
            if k > dataset.graph.node_count() {
                return Err(CliError::Invalid(format!(
                    "k = {k} exceeds node count {}",
                    dataset.graph.node_count()
                )));
            }
            let out = ensure_out_dir(&output)?;
            formats::write_suspects(
                &out.join("suspects.csv"),
                &dataset,
                &sas,
                &stages.pps,
                &features,
                &stages.behavior,
            )?;
            write_resolved(&out, &cfg)?;
            let shown = k.min(sas.entries.len());
            for &(v, sigma) in &sas.entries[..shown] {
                println!("{}\t{}\t{}", v, dataset.addresses.name(v), sigma);
            }
            Ok(())
        }
        Command::Eval { graph_dir, mode, k, flags, output } => {
            let (mut cfg, threads) = flags.resolve()?;
            if let Some(k) = k {
                cfg.eval_k = Some(k as usize);
            }
            let mode = EvalMode::parse(&mode)?;
            let dataset = load_graph_dir(&graph_dir)?;
            let artifacts = run_pipeline(&dataset, &cfg, mode, threads)?;
            let out = ensure_out_dir(&output)?;
            formats::write_metrics(&out.join("metrics.txt"), &artifacts.report)?;
            let dataset_checksum = {
                let edges = std::fs::read(graph_dir.join("edges.csv"))
                    .map_err(|e| CliError::io(graph_dir.join("edges.csv"), e))?;
                fnv64(&edges)
            };
            formats::write_run_manifest(
                &out.join("manifest.txt"),
                &artifacts.report,
                dataset_checksum,
            )?;
            formats::write_sps(&out.join("sps.csv"), &artifacts.pps)?;
            formats::write_svn(&out.join("svn.csv"), &artifacts.pps)?;
            formats::write_scores(&out.join("scores.csv"), &artifacts.behavior)?;
            formats::write_predictions(&out.join("predictions.csv"), &artifacts.features)?;
            formats::write_suspects(
                &out.join("suspects.csv"),
                &dataset,
                &artifacts.sas,
                &artifacts.pps,
                &artifacts.features,
                &artifacts.behavior,
            )?;
            if let Some(model) = &artifacts.model {
                formats::write_model(&out.join("model.txt"), model)?;
            }
            write_resolved(&out, &cfg)?;
            print!("{}", artifacts.report.to_text());
            Ok(())
        }
        Command::Synth { manifest, output } => {
            let map = mpo_cli::config::read_kv_file(&manifest)?;
            let parsed = parse_manifest(&map)?;
            let (dataset, records) = parsed.build()?;
            let out = ensure_out_dir(&output)?;
            write_benchmark(&out, &dataset)?;
            let manifest_text =
                std::fs::read_to_string(&manifest).map_err(|e| CliError::io(&manifest, e))?;
            std::fs::write(out.join("manifest.cfg"), manifest_text)
                .map_err(|e| CliError::io(out.join("manifest.cfg"), e))?;
            write_resolved(&out, &RunConfig::default())?;
            eprintln!(
                "benchmark: {} ({} injected positives across {} patterns)",
                dataset.graph.summary(),
                dataset.graph.positive_count(),
                records.len()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
