//! Core algorithms for ranking suspicious accounts in directed, weighted,
//! timestamped transaction graphs.
//!
//! The pipeline implemented here: multi-source approximate personalized
//! PageRank over the transaction graph ([`ppr`]), per-node timestamp/weight
//! asymmetry scores ([`behavior`]), a logistic-regression fusion of those
//! scores ([`classify`]), and a final anomaly score combining PageRank mass
//! with classifier output ([`anomaly`]). [`patterns`] generates synthetic
//! laundering structures for benchmarks and [`metrics`] holds the ranking
//! metrics used to evaluate detections.
//!
//! The crate is `no_std` (alloc only). All IO, file formats and the command
//! line live in the companion `mpo-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod anomaly;
pub mod behavior;
pub mod classify;
pub mod graph;
pub mod metrics;
pub mod patterns;
pub mod ppr;
pub mod rng;

pub use graph::{Edge, GraphBuilder, NodeId, TransactionGraph};
pub use ppr::{DanglingRule, PprConfig, PprScoreSet};
