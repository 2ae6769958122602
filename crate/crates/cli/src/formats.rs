//! Text artifacts written and read by the pipeline stages.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use mpo_core::anomaly::AnomalyScoreSet;
use mpo_core::behavior::{BehaviorScores, ScoreMap};
use mpo_core::classify::{LogisticModel, PatternFeatureSet, FEATURE_DIM};
use mpo_core::graph::NodeId;
use mpo_core::ppr::PprScoreSet;

use crate::ingest::{AddressMap, Dataset};
use crate::pipeline::EvalReport;
use crate::{CliError, Result};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `source_id,node_id,score` rows, source ascending then node ascending.
pub fn write_sps(path: &Path, pps: &PprScoreSet) -> Result<()> {
    let mut out = String::from("source_id,node_id,score\n");
    for run in &pps.per_source {
        for &(v, score) in &run.entries {
            let _ = writeln!(out, "{},{},{}", run.source, v, score);
        }
    }
    write_text(path, &out)
}

/// One visited node id per line.
pub fn write_svn(path: &Path, pps: &PprScoreSet) -> Result<()> {
    let mut out = String::from("node_id\n");
    for &v in &pps.visited {
        let _ = writeln!(out, "{v}");
    }
    write_text(path, &out)
}

pub fn read_svn(path: &Path) -> Result<Vec<NodeId>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut nodes = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || (i == 0 && t == "node_id") {
            continue;
        }
        nodes.push(
            t.parse::<NodeId>()
                .map_err(|_| CliError::parse(path, i + 1, format!("bad node id `{t}`")))?,
        );
    }
    Ok(nodes)
}

/// `node_id,theta_raw,theta_norm,omega_raw,omega_norm` per scored node.
pub fn write_scores(path: &Path, bs: &BehaviorScores) -> Result<()> {
    let mut out = String::from("node_id,theta_raw,theta_norm,omega_raw,omega_norm\n");
    for (i, &v) in bs.nodes.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            v, bs.theta_raw[i], bs.theta_norm[i], bs.omega_raw[i], bs.omega_norm[i]
        );
    }
    write_text(path, &out)
}

pub fn read_scores(path: &Path) -> Result<BehaviorScores> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut bs = BehaviorScores {
        nodes: Vec::new(),
        theta_raw: Vec::new(),
        theta_norm: Vec::new(),
        omega_raw: Vec::new(),
        omega_norm: Vec::new(),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || (i == 0 && t.starts_with("node_id,")) {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::parse(path, i + 1, "expected 5 fields"));
        }
        let bad = |what: &str| CliError::parse(path, i + 1, format!("bad {what}"));
        bs.nodes.push(fields[0].parse().map_err(|_| bad("node id"))?);
        bs.theta_raw.push(fields[1].parse().map_err(|_| bad("theta_raw"))?);
        bs.theta_norm.push(fields[2].parse().map_err(|_| bad("theta_norm"))?);
        bs.omega_raw.push(fields[3].parse().map_err(|_| bad("omega_raw"))?);
        bs.omega_norm.push(fields[4].parse().map_err(|_| bad("omega_norm"))?);
    }
    Ok(bs)
}

/// The two normalized columns as score maps (for feature building).
pub fn scores_to_maps(bs: &BehaviorScores) -> (ScoreMap, ScoreMap) {
    (
        ScoreMap { nodes: bs.nodes.clone(), raw: bs.theta_raw.clone(), norm: bs.theta_norm.clone() },
        ScoreMap { nodes: bs.nodes.clone(), raw: bs.omega_raw.clone(), norm: bs.omega_norm.clone() },
    )
}

pub fn write_model(path: &Path, model: &LogisticModel) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "schema = {}", model.schema);
    let _ = writeln!(out, "features = theta_norm,omega_norm");
    let weights: Vec<String> = model.weights.iter().map(|w| w.to_string()).collect();
    let _ = writeln!(out, "weights = {}", weights.join(","));
    let _ = writeln!(out, "bias = {}", model.bias);
    let _ = writeln!(out, "reg_strength = {}", model.reg_strength);
    let _ = writeln!(out, "iter_cap = {}", model.iter_cap);
    let _ = writeln!(out, "seed = {}", model.seed);
    write_text(path, &out)
}

pub fn read_model(path: &Path) -> Result<LogisticModel> {
    let map = crate::config::read_kv_file(path)?;
    let get = |key: &str| -> Result<&String> {
        map.get(key)
            .ok_or_else(|| CliError::Invalid(format!("{}: missing key `{key}`", path.display())))
    };
    let parse = |key: &str, value: &str| -> Result<f64> {
        value
            .parse()
            .map_err(|_| CliError::Invalid(format!("{}: bad value for `{key}`", path.display())))
    };
    let schema: u32 = get("schema")?
        .parse()
        .map_err(|_| CliError::Invalid(format!("{}: bad schema", path.display())))?;
    if schema != 1 {
        return Err(CliError::Invalid(format!(
            "{}: unsupported model schema {schema}",
            path.display()
        )));
    }
    let weights: Vec<f64> = get("weights")?
        .split(',')
        .map(|w| parse("weights", w.trim()))
        .collect::<Result<_>>()?;
    if weights.len() != FEATURE_DIM {
        return Err(CliError::Invalid(format!(
            "{}: schema 1 expects {FEATURE_DIM} weights, found {}",
            path.display(),
            weights.len()
        )));
    }
    Ok(LogisticModel {
        schema,
        weights,
        bias: parse("bias", get("bias")?)?,
        reg_strength: parse("reg_strength", get("reg_strength")?)?,
        iter_cap: get("iter_cap")?
            .parse()
            .map_err(|_| CliError::Invalid(format!("{}: bad iter_cap", path.display())))?,
        seed: get("seed")?
            .parse()
            .map_err(|_| CliError::Invalid(format!("{}: bad seed", path.display())))?,
    })
}

/// `node_id,f_value` per predicted node.
pub fn write_predictions(path: &Path, pfs: &PatternFeatureSet) -> Result<()> {
    let mut out = String::from("node_id,f_value\n");
    for (i, &v) in pfs.nodes.iter().enumerate() {
        let _ = writeln!(out, "{},{}", v, pfs.f_values[i]);
    }
    write_text(path, &out)
}

/// Ranked suspect report. Nodes the PageRank stage never visited are
/// appended after the scored ranking with sigma 0 and empty feature fields.
pub fn write_suspects(
    path: &Path,
    dataset: &Dataset,
    sas: &AnomalyScoreSet,
    pps: &PprScoreSet,
    pfs: &PatternFeatureSet,
    bs: &BehaviorScores,
) -> Result<()> {
    let n = dataset.graph.node_count();
    let mut f_of = vec![None; n];
    for (i, &v) in pfs.nodes.iter().enumerate() {
        f_of[v as usize] = Some(pfs.f_values[i]);
    }
    let mut behavior_of = vec![None; n];
    for (i, &v) in bs.nodes.iter().enumerate() {
        behavior_of[v as usize] = Some((bs.theta_norm[i], bs.omega_norm[i]));
    }
    let mut out = String::from("rank,node_id,address,sigma,pi,f_value,theta_norm,omega_norm\n");
    let mut rank = 0usize;
    let mut seen = vec![false; n];
    for &(v, sigma) in &sas.entries {
        rank += 1;
        seen[v as usize] = true;
        let (theta, omega) = behavior_of[v as usize].unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            rank,
            v,
            address_of(&dataset.addresses, v),
            sigma,
            pps.aggregate_scaled[v as usize],
            f_of[v as usize].map(|f| f.to_string()).unwrap_or_default(),
            if theta.is_nan() { String::new() } else { theta.to_string() },
            if omega.is_nan() { String::new() } else { omega.to_string() },
        );
    }
    for v in 0..n as NodeId {
        if !seen[v as usize] {
            rank += 1;
            let _ = writeln!(out, "{},{},{},0,0,,,", rank, v, address_of(&dataset.addresses, v));
        }
    }
    write_text(path, &out)
}

fn address_of(addresses: &AddressMap, v: NodeId) -> &str {
    if (v as usize) < addresses.len() {
        addresses.name(v)
    } else {
        ""
    }
}

/// Flat key-value metrics report. `wall_clock_secs` is the only field
/// excluded from determinism comparisons.
pub fn write_metrics(path: &Path, report: &EvalReport) -> Result<()> {
    write_text(path, &report.to_text())
}

pub fn read_metrics(path: &Path) -> Result<BTreeMap<String, String>> {
    crate::config::read_kv_file(path)
}

/// Run manifest: enough to reproduce and to detect input drift.
pub fn write_run_manifest(
    path: &Path,
    report: &EvalReport,
    dataset_checksum: u64,
) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "config_hash = {}", report.config_hash);
    let _ = writeln!(out, "dataset_checksum = {dataset_checksum:016x}");
    let _ = writeln!(out, "dataset_id = {}", report.dataset_id);
    let _ = writeln!(out, "mode = {}", report.mode);
    let _ = writeln!(out, "seed = {}", report.seed);
    write_text(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mpo_core::behavior::BehaviorScores;

    #[test]
    fn svn_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("svn.csv");
        let pps = PprScoreSet {
            per_source: vec![],
            visited: vec![1, 4, 9],
            aggregate_raw: vec![0.0; 10],
            aggregate_scaled: vec![0.0; 10],
            empty_sources: false,
        };
        write_svn(&path, &pps).unwrap();
        assert_eq!(read_svn(&path).unwrap(), vec![1, 4, 9]);
    }

    #[test]
    fn scores_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let bs = BehaviorScores {
            nodes: vec![0, 3],
            theta_raw: vec![6.0, 0.5],
            theta_norm: vec![1.0, 0.0],
            omega_raw: vec![1.0, 2.25],
            omega_norm: vec![0.0, 1.0],
        };
        write_scores(&path, &bs).unwrap();
        let back = read_scores(&path).unwrap();
        assert_eq!(back.nodes, bs.nodes);
        assert_eq!(back.theta_raw, bs.theta_raw);
        assert_eq!(back.omega_norm, bs.omega_norm);
    }

    #[test]
    fn model_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = LogisticModel {
            schema: 1,
            weights: vec![-3.25, 0.125],
            bias: 1.75,
            reg_strength: 0.1,
            iter_cap: 1000,
            seed: 42,
        };
        write_model(&path, &model).unwrap();
        assert_eq!(read_model(&path).unwrap(), model);
    }

    #[test]
    fn model_rejects_unknown_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        std::fs::write(&path, "schema = 2\nweights = 1,2,3\nbias = 0\nreg_strength = 0.1\niter_cap = 5\nseed = 0\n").unwrap();
        assert!(read_model(&path).is_err());
    }
}
