//! Best-effort loaders for the public dataset layouts, all funneling into
//! the canonical graph. Column names are presets, overridable through
//! `adapter.*` config keys, since the public releases vary across versions.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use mpo_core::graph::{GraphBuilder, NodeId};

use crate::ingest::{AddressMap, Dataset};
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdapterKind {
    /// Canonical `edges.csv` (+ optional `labels.csv`) pair.
    Generic,
    /// Transaction-level layout: `txs_edgelist.csv`, `txs_features.csv`
    /// (id + time step), `txs_classes.csv` (`1` = illicit). Edges at time
    /// steps past the cutoff are dropped.
    EllipticPP,
    /// Single edge CSV with named columns plus an optional flag file.
    EthereumFraud,
    /// Single edge CSV with named columns plus an optional flag file.
    Wormhole,
}

impl AdapterKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(AdapterKind::Generic),
            "ellipticpp" => Ok(AdapterKind::EllipticPP),
            "ethereum" => Ok(AdapterKind::EthereumFraud),
            "wormhole" => Ok(AdapterKind::Wormhole),
            other => Err(CliError::Invalid(format!(
                "adapter `{other}` is not one of generic|ellipticpp|ethereum|wormhole"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            AdapterKind::Generic => "generic",
            AdapterKind::EllipticPP => "ellipticpp",
            AdapterKind::EthereumFraud => "ethereum",
            AdapterKind::Wormhole => "wormhole",
        }
    }
}

/// Header-driven column selection for edge CSVs.
struct ColumnMap {
    src: String,
    dst: String,
    weight: Option<String>,
    timestamp: Option<String>,
}

fn override_or<'a>(
    overrides: &'a BTreeMap<String, String>,
    key: &str,
    default: &'a str,
) -> &'a str {
    overrides.get(key).map(String::as_str).unwrap_or(default)
}

fn split_csv(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn find_column(
    adapter: &'static str,
    header: &[&str],
    name: &str,
) -> Result<usize> {
    header
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| CliError::MissingColumn { adapter, column: name.to_string() })
}

/// Load a header-first edge CSV through a column map.
fn load_mapped_edges(
    adapter: &'static str,
    path: &Path,
    cols: &ColumnMap,
    builder: &mut GraphBuilder,
    addresses: &mut AddressMap,
) -> Result<()> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header_line = match lines.next() {
        Some((_, line)) => line.map_err(|e| CliError::io(path, e))?,
        None => return Ok(()),
    };
    let header = split_csv(&header_line);
    let src_i = find_column(adapter, &header, &cols.src)?;
    let dst_i = find_column(adapter, &header, &cols.dst)?;
    let weight_i = cols
        .weight
        .as_deref()
        .map(|c| find_column(adapter, &header, c))
        .transpose()?;
    let ts_i = cols
        .timestamp
        .as_deref()
        .map(|c| find_column(adapter, &header, c))
        .transpose()?;
    for (i, line) in lines {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv(&line);
        let need = src_i.max(dst_i).max(weight_i.unwrap_or(0)).max(ts_i.unwrap_or(0));
        if fields.len() <= need {
            return Err(CliError::parse(path, i + 1, "row shorter than header"));
        }
        let weight = match weight_i {
            Some(w) => fields[w].parse::<f64>().map_err(|_| {
                CliError::parse(path, i + 1, format!("bad weight `{}`", fields[w]))
            })?,
            None => 1.0,
        };
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(CliError::parse(path, i + 1, format!("weight {weight} invalid")));
        }
        let timestamp = match ts_i {
            Some(t) => {
                let raw = fields[t];
                raw.parse::<u64>().or_else(|_| {
                    raw.parse::<f64>()
                        .map_err(|_| ())
                        .and_then(|f| if f >= 0.0 { Ok(f as u64) } else { Err(()) })
                })
                .map_err(|_| {
                    CliError::parse(path, i + 1, format!("bad timestamp `{raw}`"))
                })?
            }
            None => 0,
        };
        let src = addresses.intern(fields[src_i]);
        let dst = addresses.intern(fields[dst_i]);
        builder
            .add_edge(src, dst, weight, timestamp)
            .map_err(|e| CliError::parse(path, i + 1, e.to_string()))?;
    }
    Ok(())
}

/// Optional `address,flag` label file with a configurable positive value.
fn load_flag_file(
    path: &Path,
    positive: &str,
    builder: &mut GraphBuilder,
    addresses: &mut AddressMap,
) -> Result<Vec<(NodeId, bool)>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() || i == 0 {
            continue; // header assumed
        }
        let fields = split_csv(&line);
        if fields.len() < 2 {
            return Err(CliError::parse(path, i + 1, "expected `address,flag`"));
        }
        let id = addresses.intern(fields[0]);
        builder.ensure_node(id);
        labels.push((id, fields[1] == positive));
    }
    Ok(labels)
}

fn load_generic(path: &Path) -> Result<Dataset> {
    let (edges, labels) = if path.is_dir() {
        let edges = path.join("edges.csv");
        let labels = path.join("labels.csv");
        (edges, labels.exists().then_some(labels))
    } else {
        (path.to_path_buf(), None)
    };
    crate::ingest::ingest_edge_list(&edges, labels.as_deref())
}

fn load_elliptic(dir: &Path, overrides: &BTreeMap<String, String>) -> Result<Dataset> {
    let edges_file = dir.join(override_or(overrides, "adapter.edges_file", "txs_edgelist.csv"));
    let features_file =
        dir.join(override_or(overrides, "adapter.features_file", "txs_features.csv"));
    let classes_file =
        dir.join(override_or(overrides, "adapter.classes_file", "txs_classes.csv"));
    let cutoff: u64 = override_or(overrides, "adapter.time_cutoff", "42")
        .parse()
        .map_err(|_| CliError::Config("adapter.time_cutoff must be an integer".into()))?;
    let illicit = override_or(overrides, "adapter.positive_value", "1");

    // tx id -> time step from the features table (id first, step second)
    let mut step_of: HashMap<String, u64> = HashMap::new();
    let file = fs::File::open(&features_file).map_err(|e| CliError::io(&features_file, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(&features_file, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv(&line);
        if fields.len() < 2 {
            return Err(CliError::parse(&features_file, i + 1, "expected id and time step"));
        }
        if i == 0 && fields[1].parse::<f64>().is_err() {
            continue; // header
        }
        let step = fields[1]
            .parse::<f64>()
            .map_err(|_| CliError::parse(&features_file, i + 1, "bad time step"))?;
        step_of.insert(fields[0].to_string(), step as u64);
    }

    let mut builder = GraphBuilder::new();
    let mut addresses = AddressMap::new();
    let file = fs::File::open(&edges_file).map_err(|e| CliError::io(&edges_file, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(&edges_file, e))?;
        if line.trim().is_empty() || i == 0 {
            continue; // header `txId1,txId2`
        }
        let fields = split_csv(&line);
        if fields.len() < 2 {
            return Err(CliError::parse(&edges_file, i + 1, "expected `txId1,txId2`"));
        }
        let step = match (step_of.get(fields[0]), step_of.get(fields[1])) {
            (Some(&a), Some(&b)) => a.max(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => 0,
        };
        if step >= cutoff {
            continue; // topology reconfigures past the cutoff
        }
        let src = addresses.intern(fields[0]);
        let dst = addresses.intern(fields[1]);
        builder
            .add_edge(src, dst, 1.0, step)
            .map_err(|e| CliError::parse(&edges_file, i + 1, e.to_string()))?;
    }

    let mut labels = Vec::new();
    let file = fs::File::open(&classes_file).map_err(|e| CliError::io(&classes_file, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(&classes_file, e))?;
        if line.trim().is_empty() || i == 0 {
            continue; // header `txId,class`
        }
        let fields = split_csv(&line);
        if fields.len() < 2 {
            return Err(CliError::parse(&classes_file, i + 1, "expected `txId,class`"));
        }
        if fields[1] == "unknown" {
            continue;
        }
        // only label transactions that survived the cutoff filter
        if let Some(id) = addresses.get(fields[0]) {
            labels.push((id, fields[1] == illicit));
        }
    }

    let mut graph = builder.build();
    if !labels.is_empty() {
        graph.set_labels(labels)?;
    }
    Ok(Dataset { graph, addresses, id: "ellipticpp".into() })
}

fn load_flagged_edges(
    adapter: &'static str,
    path: &Path,
    overrides: &BTreeMap<String, String>,
    defaults: (&str, &str, &str, &str),
) -> Result<Dataset> {
    let (src_d, dst_d, weight_d, ts_d) = defaults;
    let cols = ColumnMap {
        src: override_or(overrides, "adapter.src", src_d).to_string(),
        dst: override_or(overrides, "adapter.dst", dst_d).to_string(),
        weight: Some(override_or(overrides, "adapter.weight", weight_d).to_string()),
        timestamp: Some(override_or(overrides, "adapter.timestamp", ts_d).to_string()),
    };
    let (edges_file, labels_file) = if path.is_dir() {
        let edges = path.join(override_or(overrides, "adapter.edges_file", "edges.csv"));
        let labels = path.join(override_or(overrides, "adapter.labels_file", "labels.csv"));
        (edges, labels.exists().then_some(labels))
    } else {
        (path.to_path_buf(), None)
    };
    let mut builder = GraphBuilder::new();
    let mut addresses = AddressMap::new();
    load_mapped_edges(adapter, &edges_file, &cols, &mut builder, &mut addresses)?;
    let labels = match labels_file {
        Some(f) => load_flag_file(
            &f,
            override_or(overrides, "adapter.positive_value", "1"),
            &mut builder,
            &mut addresses,
        )?,
        None => Vec::new(),
    };
    let mut graph = builder.build();
    if !labels.is_empty() {
        graph.set_labels(labels)?;
    }
    Ok(Dataset { graph, addresses, id: adapter.into() })
}

/// Load a dataset through the chosen adapter. `path` is a file or a
/// directory depending on the layout; `overrides` are `adapter.*` keys.
pub fn load_dataset(
    kind: AdapterKind,
    path: &Path,
    overrides: &BTreeMap<String, String>,
) -> Result<Dataset> {
    let mut dataset = match kind {
        AdapterKind::Generic => load_generic(path),
        AdapterKind::EllipticPP => load_elliptic(path, overrides),
        AdapterKind::EthereumFraud => load_flagged_edges(
            "ethereum",
            path,
            overrides,
            ("from_address", "to_address", "value", "timestamp"),
        ),
        AdapterKind::Wormhole => load_flagged_edges(
            "wormhole",
            path,
            overrides,
            ("from_address", "to_address", "value", "block_timestamp"),
        ),
    }?;
    dataset.id = kind.name().into();
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    #[test]
    fn generic_adapter_on_toy_pair() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "edges.csv", "a,b,1,10\nb,c,2,20\na,c,3,15\n");
        let ds = load_dataset(AdapterKind::Generic, dir.path(), &BTreeMap::new()).unwrap();
        assert_eq!(ds.graph.node_count(), 3);
    }

    #[test]
    fn elliptic_adapter_applies_cutoff() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "txs_edgelist.csv", "txId1,txId2\nt1,t2\nt2,t3\nt3,t4\n");
        write(
            dir.path(),
            "txs_features.csv",
            "txId,time_step\nt1,1\nt2,40\nt3,41\nt4,45\n",
        );
        write(dir.path(), "txs_classes.csv", "txId,class\nt1,1\nt2,2\nt3,unknown\nt4,1\n");
        let ds = load_dataset(AdapterKind::EllipticPP, dir.path(), &BTreeMap::new()).unwrap();
        // t3->t4 has max step 45 >= 42 and is dropped
        assert_eq!(ds.graph.edge_count(), 2);
        let t1 = ds.addresses.get("t1").unwrap();
        assert_eq!(ds.graph.label(t1), Some(true));
        let t2 = ds.addresses.get("t2").unwrap();
        assert_eq!(ds.graph.label(t2), Some(false));
        // unknown class stays unlabeled
        let t3 = ds.addresses.get("t3").unwrap();
        assert_eq!(ds.graph.label(t3), None);
    }

    #[test]
    fn ethereum_adapter_reads_named_columns() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "edges.csv",
            "from_address,to_address,value,timestamp\nx,y,5.5,100\ny,z,2,200\n",
        );
        write(dir.path(), "labels.csv", "address,flag\nx,1\ny,0\n");
        let ds = load_dataset(AdapterKind::EthereumFraud, dir.path(), &BTreeMap::new()).unwrap();
        assert_eq!(ds.graph.edge_count(), 2);
        assert_eq!(ds.graph.label(ds.addresses.get("x").unwrap()), Some(true));
        assert_eq!(ds.graph.edges()[0].weight, 5.5);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "edges.csv", "src,dst,amount,ts\nx,y,1,2\n");
        let err =
            load_dataset(AdapterKind::Wormhole, dir.path(), &BTreeMap::new()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("from_address"), "unexpected message: {msg}");
    }

    #[test]
    fn column_overrides_apply() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "edges.csv", "s,d,amt,when\nx,y,3,7\n");
        let overrides: BTreeMap<String, String> = [
            ("adapter.src", "s"),
            ("adapter.dst", "d"),
            ("adapter.weight", "amt"),
            ("adapter.timestamp", "when"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let ds = load_dataset(AdapterKind::EthereumFraud, dir.path(), &overrides).unwrap();
        assert_eq!(ds.graph.edge_count(), 1);
        assert_eq!(ds.graph.edges()[0].timestamp, 7);
    }
}
