//! IO, file formats, dataset adapters and pipeline orchestration around
//! `mpo-core`. Everything on disk is plain text so any stage can be
//! inspected or swapped; the one binary artifact is an internal graph cache
//! keyed by checksum.

pub mod adapters;
pub mod config;
pub mod formats;
pub mod ingest;
pub mod pipeline;
pub mod synth;

use std::path::PathBuf;

use mpo_core::graph::NodeId;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("adapter {adapter}: missing column `{column}`")]
    MissingColumn { adapter: &'static str, column: String },
    #[error("unknown node id {0} in input")]
    UnknownNode(NodeId),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] mpo_core::graph::GraphError),
    #[error(transparent)]
    Ppr(#[from] mpo_core::ppr::PprError),
    #[error(transparent)]
    Classify(#[from] mpo_core::classify::ClassifyError),
    #[error(transparent)]
    Anomaly(#[from] mpo_core::anomaly::AnomalyError),
    #[error(transparent)]
    Metrics(#[from] mpo_core::metrics::MetricsError),
    #[error(transparent)]
    Pattern(#[from] mpo_core::patterns::PatternError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse { path: path.into(), line, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// FNV-1a, used for cache keys and manifest fingerprints.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}
