//! Edge-list and label ingestion, the address map, and the on-disk graph
//! directory.
//!
//! Canonical edge file: UTF-8 CSV, one `src,dst,weight,timestamp` per line,
//! optional header detected by a non-numeric weight field. Label file:
//! `address,label` with label 0/1. Ingestion maps addresses to dense ids in
//! first-appearance order and always emits the mapping next to the graph.
//!
//! A graph directory holds `edges.csv` (id-based), `address_map.csv`,
//! optional `labels.csv`, `meta.cfg`, and `graph.bin` — a little-endian
//! cache keyed by the checksum of the CSVs, used when it matches and
//! silently rebuilt from the text files when it does not.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use mpo_core::graph::{GraphBuilder, NodeId, TransactionGraph};

use crate::{fnv64, CliError, Result};

pub const EDGES_FILE: &str = "edges.csv";
pub const ADDRESS_MAP_FILE: &str = "address_map.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const META_FILE: &str = "meta.cfg";
pub const CACHE_FILE: &str = "graph.bin";

/// Bijection between external addresses and dense node ids.
#[derive(Debug, Default, Clone)]
pub struct AddressMap {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl AddressMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, address: &str) -> NodeId {
        if let Some(&id) = self.index.get(address) {
            return id;
        }
        let id = self.names.len() as NodeId;
        self.names.push(address.to_string());
        self.index.insert(address.to_string(), id);
        id
    }

    pub fn get(&self, address: &str) -> Option<NodeId> {
        self.index.get(address).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// An ingested graph together with its address mapping.
#[derive(Debug)]
pub struct Dataset {
    pub graph: TransactionGraph,
    pub addresses: AddressMap,
    /// Identifier recorded in run manifests (directory or file stem).
    pub id: String,
}

fn is_numeric(field: &str) -> bool {
    !field.is_empty() && field.parse::<f64>().is_ok()
}

fn split_csv(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

/// Parse a weight field: must be a finite, non-negative real.
fn parse_weight(path: &Path, line_no: usize, field: &str) -> Result<f64> {
    let w: f64 = field
        .parse()
        .map_err(|_| CliError::parse(path, line_no, format!("weight `{field}` is not a number")))?;
    if !w.is_finite() || w < 0.0 {
        return Err(CliError::parse(
            path,
            line_no,
            format!("weight {w} must be finite and non-negative"),
        ));
    }
    Ok(w)
}

/// Parse a timestamp field: a non-negative integer (an integral float like
/// `10.0` is tolerated for exported data).
fn parse_timestamp(path: &Path, line_no: usize, field: &str) -> Result<u64> {
    if let Ok(t) = field.parse::<u64>() {
        return Ok(t);
    }
    let f: f64 = field.parse().map_err(|_| {
        CliError::parse(path, line_no, format!("timestamp `{field}` is not a number"))
    })?;
    if f < 0.0 {
        return Err(CliError::parse(
            path,
            line_no,
            format!("timestamp {f} must be non-negative"),
        ));
    }
    if f.fract() != 0.0 || f > u64::MAX as f64 {
        return Err(CliError::parse(
            path,
            line_no,
            format!("timestamp `{field}` is not an integer"),
        ));
    }
    Ok(f as u64)
}

/// Read a canonical edge-list file into a builder, interning addresses in
/// first-appearance order (src before dst within a row).
pub fn parse_edge_file(
    path: &Path,
    builder: &mut GraphBuilder,
    addresses: &mut AddressMap,
) -> Result<()> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv(&line);
        if fields.len() != 4 {
            return Err(CliError::parse(
                path,
                line_no,
                format!("expected 4 fields `src,dst,weight,timestamp`, got {}", fields.len()),
            ));
        }
        if line_no == 1 && !is_numeric(fields[2]) {
            continue; // header row
        }
        let weight = parse_weight(path, line_no, fields[2])?;
        let timestamp = parse_timestamp(path, line_no, fields[3])?;
        let src = addresses.intern(fields[0]);
        let dst = addresses.intern(fields[1]);
        builder
            .add_edge(src, dst, weight, timestamp)
            .map_err(|e| CliError::parse(path, line_no, e.to_string()))?;
    }
    Ok(())
}

/// Read an `address,label` file. Unseen addresses become isolated nodes.
pub fn parse_label_file(
    path: &Path,
    builder: &mut GraphBuilder,
    addresses: &mut AddressMap,
) -> Result<Vec<(NodeId, bool)>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv(&line);
        if fields.len() != 2 {
            return Err(CliError::parse(
                path,
                line_no,
                format!("expected 2 fields `address,label`, got {}", fields.len()),
            ));
        }
        if line_no == 1 && !is_numeric(fields[1]) {
            continue; // header row
        }
        let label = match fields[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(CliError::parse(
                    path,
                    line_no,
                    format!("label `{other}` must be 0 or 1"),
                ))
            }
        };
        let id = addresses.intern(fields[0]);
        builder.ensure_node(id);
        labels.push((id, label));
    }
    Ok(labels)
}

/// Ingest the canonical CSV pair into a dataset.
pub fn ingest_edge_list(edges: &Path, labels: Option<&Path>) -> Result<Dataset> {
    let mut builder = GraphBuilder::new();
    let mut addresses = AddressMap::new();
    parse_edge_file(edges, &mut builder, &mut addresses)?;
    let label_rows = match labels {
        Some(path) => parse_label_file(path, &mut builder, &mut addresses)?,
        None => Vec::new(),
    };
    let mut graph = builder.build();
    if !label_rows.is_empty() {
        graph.set_labels(label_rows)?;
    }
    let id = edges
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(Dataset { graph, addresses, id })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| CliError::io(path, e))
}

fn edges_csv_text(graph: &TransactionGraph) -> String {
    let mut out = String::from("src,dst,weight,timestamp\n");
    for e in graph.edges() {
        out.push_str(&format!("{},{},{},{}\n", e.src, e.dst, e.weight, e.timestamp));
    }
    out
}

fn labels_csv_text(graph: &TransactionGraph) -> String {
    let mut out = String::from("node_id,label\n");
    for v in 0..graph.node_count() as NodeId {
        if let Some(l) = graph.label(v) {
            out.push_str(&format!("{},{}\n", v, u8::from(l)));
        }
    }
    out
}

/// Serialize a dataset into a graph directory (text plus the binary cache).
pub fn write_graph_dir(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let edges_text = edges_csv_text(&dataset.graph);
    let labels_text = dataset.graph.has_labels().then(|| labels_csv_text(&dataset.graph));

    write_file(&dir.join(EDGES_FILE), &edges_text)?;
    let mut map_text = String::from("address,node_id\n");
    for id in 0..dataset.addresses.len() as NodeId {
        map_text.push_str(&format!("{},{}\n", dataset.addresses.name(id), id));
    }
    write_file(&dir.join(ADDRESS_MAP_FILE), &map_text)?;
    if let Some(ref text) = labels_text {
        write_file(&dir.join(LABELS_FILE), text)?;
    }

    let checksum = csv_checksum(&edges_text, labels_text.as_deref());
    let meta = format!(
        "checksum = {checksum:016x}\nedges = {}\nformat_version = 1\nid = {}\nnodes = {}\n",
        dataset.graph.edge_count(),
        dataset.id,
        dataset.graph.node_count(),
    );
    write_file(&dir.join(META_FILE), &meta)?;
    write_cache(&dir.join(CACHE_FILE), &dataset.graph, checksum)?;
    Ok(())
}

fn csv_checksum(edges_text: &str, labels_text: Option<&str>) -> u64 {
    let mut bytes = edges_text.as_bytes().to_vec();
    if let Some(l) = labels_text {
        bytes.extend_from_slice(l.as_bytes());
    }
    fnv64(&bytes)
}

const CACHE_MAGIC: &[u8; 4] = b"MPOG";
const CACHE_VERSION: u32 = 1;

fn write_cache(path: &Path, graph: &TransactionGraph, checksum: u64) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    w.write_all(CACHE_MAGIC).map_err(io)?;
    w.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&checksum.to_le_bytes()).map_err(io)?;
    w.write_all(&(graph.node_count() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(graph.edge_count() as u64).to_le_bytes()).map_err(io)?;
    for e in graph.edges() {
        w.write_all(&e.src.to_le_bytes()).map_err(io)?;
        w.write_all(&e.dst.to_le_bytes()).map_err(io)?;
        w.write_all(&e.weight.to_le_bytes()).map_err(io)?;
        w.write_all(&e.timestamp.to_le_bytes()).map_err(io)?;
    }
    let labeled: Vec<(NodeId, bool)> = (0..graph.node_count() as NodeId)
        .filter_map(|v| graph.label(v).map(|l| (v, l)))
        .collect();
    w.write_all(&(labeled.len() as u64).to_le_bytes()).map_err(io)?;
    for (v, l) in labeled {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
        w.write_all(&[u8::from(l)]).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_cache(path: &Path, expected_checksum: u64) -> Result<Option<TransactionGraph>> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(_) => return Ok(None),
    };
    let mut r = BufReader::new(file);
    let io = |e| CliError::io(path, e);
    let mut magic = [0u8; 4];
    if r.read_exact(&mut magic).is_err() || &magic != CACHE_MAGIC {
        return Ok(None);
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u32buf).map_err(io)?;
    if u32::from_le_bytes(u32buf) != CACHE_VERSION {
        return Ok(None);
    }
    r.read_exact(&mut u64buf).map_err(io)?;
    if u64::from_le_bytes(u64buf) != expected_checksum {
        return Ok(None);
    }
    r.read_exact(&mut u64buf).map_err(io)?;
    let nodes = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf).map_err(io)?;
    let edge_count = u64::from_le_bytes(u64buf) as usize;
    let mut builder = GraphBuilder::with_capacity(nodes, edge_count);
    if nodes > 0 {
        builder.ensure_node(nodes as NodeId - 1);
    }
    for _ in 0..edge_count {
        r.read_exact(&mut u32buf).map_err(io)?;
        let src = u32::from_le_bytes(u32buf);
        r.read_exact(&mut u32buf).map_err(io)?;
        let dst = u32::from_le_bytes(u32buf);
        r.read_exact(&mut u64buf).map_err(io)?;
        let weight = f64::from_le_bytes(u64buf);
        r.read_exact(&mut u64buf).map_err(io)?;
        let timestamp = u64::from_le_bytes(u64buf);
        builder
            .add_edge(src, dst, weight, timestamp)
            .map_err(|e| CliError::Invalid(format!("{}: corrupt cache: {e}", path.display())))?;
    }
    r.read_exact(&mut u64buf).map_err(io)?;
    let labeled = u64::from_le_bytes(u64buf) as usize;
    let mut labels = Vec::with_capacity(labeled);
    let mut byte = [0u8; 1];
    for _ in 0..labeled {
        r.read_exact(&mut u32buf).map_err(io)?;
        r.read_exact(&mut byte).map_err(io)?;
        labels.push((u32::from_le_bytes(u32buf), byte[0] != 0));
    }
    let mut graph = builder.build();
    if !labels.is_empty() {
        graph
            .set_labels(labels)
            .map_err(|e| CliError::Invalid(format!("{}: corrupt cache: {e}", path.display())))?;
    }
    Ok(Some(graph))
}

fn read_address_map(path: &Path) -> Result<AddressMap> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut map = AddressMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() || (i == 0 && line.starts_with("address,")) {
            continue;
        }
        let fields = split_csv(&line);
        if fields.len() != 2 {
            return Err(CliError::parse(path, i + 1, "expected `address,node_id`"));
        }
        let expected: NodeId = fields[1]
            .parse()
            .map_err(|_| CliError::parse(path, i + 1, "node_id is not an integer"))?;
        let got = map.intern(fields[0]);
        if got != expected {
            return Err(CliError::parse(
                path,
                i + 1,
                format!("address map not dense: `{}` mapped to {got}, file says {expected}", fields[0]),
            ));
        }
    }
    Ok(map)
}

/// Load a graph directory, preferring the binary cache when its checksum
/// matches the text files.
pub fn load_graph_dir(dir: &Path) -> Result<Dataset> {
    let meta = crate::config::read_kv_file(&dir.join(META_FILE))?;
    let id = meta.get("id").cloned().unwrap_or_else(|| "dataset".into());

    let edges_path = dir.join(EDGES_FILE);
    let edges_text =
        fs::read_to_string(&edges_path).map_err(|e| CliError::io(&edges_path, e))?;
    let labels_path = dir.join(LABELS_FILE);
    let labels_text = fs::read_to_string(&labels_path).ok();
    let checksum = csv_checksum(&edges_text, labels_text.as_deref());

    let addresses = read_address_map(&dir.join(ADDRESS_MAP_FILE))?;
    if let Some(graph) = read_cache(&dir.join(CACHE_FILE), checksum)? {
        return Ok(Dataset { graph, addresses, id });
    }

    // cache miss: rebuild from the text files (ids are already dense)
    let mut builder = GraphBuilder::with_capacity(addresses.len(), 0);
    if !addresses.is_empty() {
        builder.ensure_node(addresses.len() as NodeId - 1);
    }
    for (i, line) in edges_text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line.starts_with("src,")) {
            continue;
        }
        let fields = split_csv(line);
        if fields.len() != 4 {
            return Err(CliError::parse(&edges_path, i + 1, "expected 4 fields"));
        }
        let parse_id = |f: &str| -> Result<NodeId> {
            f.parse().map_err(|_| CliError::parse(&edges_path, i + 1, "bad node id"))
        };
        builder
            .add_edge(
                parse_id(fields[0])?,
                parse_id(fields[1])?,
                parse_weight(&edges_path, i + 1, fields[2])?,
                parse_timestamp(&edges_path, i + 1, fields[3])?,
            )
            .map_err(|e| CliError::parse(&edges_path, i + 1, e.to_string()))?;
    }
    let mut graph = builder.build();
    if let Some(text) = labels_text {
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || (i == 0 && line.starts_with("node_id,")) {
                continue;
            }
            let fields = split_csv(line);
            if fields.len() != 2 {
                return Err(CliError::parse(&labels_path, i + 1, "expected `node_id,label`"));
            }
            let v: NodeId = fields[0]
                .parse()
                .map_err(|_| CliError::parse(&labels_path, i + 1, "bad node id"))?;
            labels.push((v, fields[1] == "1"));
        }
        if !labels.is_empty() {
            graph.set_labels(labels)?;
        }
    }
    Ok(Dataset { graph, addresses, id })
}

/// Path helper used by subcommands writing into an output directory.
pub fn ensure_out_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.to_path_buf())
}
