//! Benchmark construction from a manifest: a random background graph with
//! laundering shapes injected on top, every node carrying ground truth.
//!
//! The manifest is the flat key-value format:
//!
//! ```text
//! background.nodes = 2000
//! background.edges = 9000
//! background.seed = 7
//! background.weight_min = 1
//! background.weight_max = 100
//! background.time_min = 0
//! background.time_max = 1000000
//! inject.window_ratio = 0.1
//! inject.weight_min = 5
//! inject.weight_max = 15
//! pattern.0.kind = fan_in
//! pattern.0.width = 12
//! pattern.0.seed = 101
//! ```
//!
//! Unless a pattern pins its own `time_min`/`time_max`, its timestamps are
//! compressed into a window of `window_ratio` times the background span,
//! placed at a seeded offset — quick-turnaround activity is part of the
//! signal the timestamp score looks for.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use mpo_core::graph::NodeId;
use mpo_core::patterns::{
    inject, pattern_graph, InjectionRecord, PatternShape, PatternSpec,
};
use mpo_core::rng;

use crate::ingest::{AddressMap, Dataset};
use crate::{CliError, Result};

const WINDOW_SALT: u64 = 0x77696e646f77; // distinct stream for window placement

#[derive(Debug, Clone)]
pub struct SynthManifest {
    pub background_nodes: u32,
    pub background_edges: u64,
    pub background_seed: u64,
    pub weight_range: (f64, f64),
    pub time_range: (u64, u64),
    pub window_ratio: f64,
    pub inject_weights: Option<(f64, f64)>,
    pub patterns: Vec<PatternEntry>,
}

#[derive(Debug, Clone)]
pub struct PatternEntry {
    pub shape: PatternShape,
    pub seed: u64,
    pub time_override: Option<(u64, u64)>,
    pub weight_override: Option<(f64, f64)>,
}

fn req<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| CliError::Config(format!("manifest missing key `{key}`")))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("manifest key `{key}`: bad value `{value}`")))
}

fn opt<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key).map(|v| parse(key, v)).transpose()
}

/// Parse a benchmark manifest from flat key-value pairs.
pub fn parse_manifest(map: &BTreeMap<String, String>) -> Result<SynthManifest> {
    let background_nodes: u32 = parse("background.nodes", req(map, "background.nodes")?)?;
    let background_edges: u64 = parse("background.edges", req(map, "background.edges")?)?;
    let background_seed: u64 = opt(map, "background.seed")?.unwrap_or(0);
    let weight_range = (
        opt(map, "background.weight_min")?.unwrap_or(1.0),
        opt(map, "background.weight_max")?.unwrap_or(100.0),
    );
    let time_range = (
        opt(map, "background.time_min")?.unwrap_or(0),
        opt(map, "background.time_max")?.unwrap_or(1_000_000),
    );
    let window_ratio: f64 = opt(map, "inject.window_ratio")?.unwrap_or(0.1);
    if !(0.0 < window_ratio && window_ratio <= 1.0) {
        return Err(CliError::Config(format!(
            "inject.window_ratio {window_ratio} outside (0, 1]"
        )));
    }
    let inject_weights = match (
        opt::<f64>(map, "inject.weight_min")?,
        opt::<f64>(map, "inject.weight_max")?,
    ) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(weight_range.0), hi.unwrap_or(weight_range.1))),
    };

    // collect pattern indices
    let mut indices: Vec<u32> = map
        .keys()
        .filter_map(|k| {
            k.strip_prefix("pattern.")
                .and_then(|rest| rest.split('.').next())
                .and_then(|n| n.parse().ok())
        })
        .collect();
    indices.sort_unstable();
    indices.dedup();

    let mut patterns = Vec::with_capacity(indices.len());
    for n in indices {
        let field = |name: &str| format!("pattern.{n}.{name}");
        let kind = req(map, &field("kind"))?;
        let get_u32 = |name: &str| -> Result<u32> { parse(&field(name), req(map, &field(name))?) };
        let shape = match kind {
            "fan_in" => PatternShape::FanIn { width: get_u32("width")? },
            "fan_out" => PatternShape::FanOut { width: get_u32("width")? },
            "gather_scatter" => PatternShape::GatherScatter {
                fan_in: get_u32("fan_in")?,
                fan_out: get_u32("fan_out")?,
            },
            "bipartite" => PatternShape::Bipartite {
                left: get_u32("left")?,
                right: get_u32("right")?,
            },
            "stack" => PatternShape::Stack { length: get_u32("length")? },
            "random" => PatternShape::Random {
                nodes: get_u32("nodes")?,
                edges: parse(&field("edges"), req(map, &field("edges"))?)?,
            },
            other => {
                return Err(CliError::Config(format!(
                    "pattern.{n}.kind `{other}` unknown (fan_in|fan_out|gather_scatter|bipartite|stack|random)"
                )))
            }
        };
        let seed: u64 = opt(map, &field("seed"))?.unwrap_or(n as u64 + 1);
        let time_override = match (
            opt::<u64>(map, &field("time_min"))?,
            opt::<u64>(map, &field("time_max"))?,
        ) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => {
                return Err(CliError::Config(format!(
                    "pattern.{n}: give both time_min and time_max or neither"
                )))
            }
        };
        let weight_override = match (
            opt::<f64>(map, &field("weight_min"))?,
            opt::<f64>(map, &field("weight_max"))?,
        ) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => {
                return Err(CliError::Config(format!(
                    "pattern.{n}: give both weight_min and weight_max or neither"
                )))
            }
        };
        patterns.push(PatternEntry { shape, seed, time_override, weight_override });
    }

    Ok(SynthManifest {
        background_nodes,
        background_edges,
        background_seed,
        weight_range,
        time_range,
        window_ratio,
        inject_weights,
        patterns,
    })
}

impl SynthManifest {
    /// The compressed timestamp window of one pattern entry.
    fn window_for(&self, entry: &PatternEntry) -> (u64, u64) {
        if let Some(t) = entry.time_override {
            return t;
        }
        let (lo, hi) = self.time_range;
        let span = hi - lo;
        let width = ((span as f64 * self.window_ratio) as u64).max(1).min(span.max(1));
        let mut r = rng::stream(entry.seed ^ WINDOW_SALT);
        let offset = rng::range_u64(&mut r, lo, hi.saturating_sub(width).max(lo));
        (offset, (offset + width).min(hi))
    }

    fn spec_for(&self, entry: &PatternEntry) -> PatternSpec {
        PatternSpec {
            shape: entry.shape,
            weight_range: entry
                .weight_override
                .or(self.inject_weights)
                .unwrap_or(self.weight_range),
            time_range: self.window_for(entry),
            seed: entry.seed,
        }
    }

    /// Build the labeled benchmark graph: background, then injections;
    /// injected nodes (anchors included) are the positives.
    pub fn build(&self) -> Result<(Dataset, Vec<InjectionRecord>)> {
        let background = pattern_graph(&PatternSpec {
            shape: PatternShape::Random {
                nodes: self.background_nodes,
                edges: self.background_edges,
            },
            weight_range: self.weight_range,
            time_range: self.time_range,
            seed: self.background_seed,
        })?;
        let specs: Vec<PatternSpec> = self.patterns.iter().map(|e| self.spec_for(e)).collect();
        let (mut graph, records) = inject(&background, &specs)?;

        let mut labels = vec![false; graph.node_count()];
        for rec in &records {
            for &v in &rec.injected_nodes {
                labels[v as usize] = true;
            }
        }
        graph.set_labels(
            labels.iter().enumerate().map(|(v, &l)| (v as NodeId, l)).collect(),
        )?;

        let mut addresses = AddressMap::new();
        for v in 0..graph.node_count() {
            addresses.intern(&format!("n{v}"));
        }
        Ok((Dataset { graph, addresses, id: "synthetic".into() }, records))
    }
}

/// Emit the raw benchmark pair consumed by `ingest`: an address-level edge
/// list and a complete ground-truth label file.
pub fn write_benchmark(dir: &Path, dataset: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut edges = String::from("src,dst,weight,timestamp\n");
    for e in dataset.graph.edges() {
        let _ = writeln!(
            edges,
            "{},{},{},{}",
            dataset.addresses.name(e.src),
            dataset.addresses.name(e.dst),
            e.weight,
            e.timestamp
        );
    }
    let edges_path = dir.join("edges.csv");
    std::fs::write(&edges_path, edges).map_err(|e| CliError::io(&edges_path, e))?;

    let mut labels = String::from("address,label\n");
    for v in 0..dataset.graph.node_count() as NodeId {
        let _ = writeln!(
            labels,
            "{},{}",
            dataset.addresses.name(v),
            u8::from(dataset.graph.label(v) == Some(true))
        );
    }
    let labels_path = dir.join("labels.csv");
    std::fs::write(&labels_path, labels).map_err(|e| CliError::io(&labels_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_kv;
    use std::path::PathBuf;

    fn manifest_text() -> &'static str {
        "background.nodes = 200\n\
         background.edges = 700\n\
         background.seed = 3\n\
         background.time_max = 100000\n\
         inject.window_ratio = 0.1\n\
         inject.weight_min = 5\n\
         inject.weight_max = 15\n\
         pattern.0.kind = fan_in\n\
         pattern.0.width = 6\n\
         pattern.0.seed = 11\n\
         pattern.1.kind = stack\n\
         pattern.1.length = 5\n\
         pattern.1.seed = 12\n"
    }

    fn parsed() -> SynthManifest {
        let map = parse_kv(manifest_text(), &PathBuf::from("m.cfg")).unwrap();
        parse_manifest(&map).unwrap()
    }

    #[test]
    fn manifest_parses() {
        let m = parsed();
        assert_eq!(m.background_nodes, 200);
        assert_eq!(m.patterns.len(), 2);
        assert_eq!(m.inject_weights, Some((5.0, 15.0)));
        assert!(matches!(m.patterns[0].shape, PatternShape::FanIn { width: 6 }));
        assert!(matches!(m.patterns[1].shape, PatternShape::Stack { length: 5 }));
    }

    #[test]
    fn injected_timestamps_compressed() {
        let m = parsed();
        let (ds, records) = m.build().unwrap();
        assert_eq!(records.len(), 2);
        let span = (m.time_range.1 - m.time_range.0) as f64;
        for rec in &records {
            let ts: Vec<u64> = rec.injected_edges.iter().map(|e| e.timestamp).collect();
            let width = (ts.iter().max().unwrap() - ts.iter().min().unwrap()) as f64;
            assert!(
                width <= span * m.window_ratio + 1.0,
                "window {width} wider than ratio allows"
            );
        }
        // ground truth covers every node, positives are the injected sets
        let positives = ds.graph.positive_count();
        let expected: usize = records.iter().map(|r| r.injected_nodes.len()).sum();
        assert_eq!(positives, expected);
    }

    #[test]
    fn build_is_deterministic() {
        let (a, _) = parsed().build().unwrap();
        let (b, _) = parsed().build().unwrap();
        assert_eq!(a.graph.edges(), b.graph.edges());
    }

    #[test]
    fn missing_pattern_field_is_reported() {
        let mut map = parse_kv(manifest_text(), &PathBuf::from("m.cfg")).unwrap();
        map.remove("pattern.0.width");
        let err = parse_manifest(&map).unwrap_err();
        assert!(err.to_string().contains("pattern.0.width"));
    }

    #[test]
    fn benchmark_files_reingest() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, _) = parsed().build().unwrap();
        write_benchmark(dir.path(), &ds).unwrap();
        let back = crate::ingest::ingest_edge_list(
            &dir.path().join("edges.csv"),
            Some(&dir.path().join("labels.csv")),
        )
        .unwrap();
        assert_eq!(back.graph.node_count(), ds.graph.node_count());
        assert_eq!(back.graph.edge_count(), ds.graph.edge_count());
        assert_eq!(back.graph.positive_count(), ds.graph.positive_count());
    }
}
