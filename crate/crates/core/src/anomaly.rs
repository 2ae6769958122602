//! Final anomaly score: scaled PageRank mass divided by the benign-class
//! probability, ranked descending with ties broken by ascending node id.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::classify::PatternFeatureSet;
use crate::graph::NodeId;
use crate::ppr::PprScoreSet;

#[derive(Debug, Clone)]
pub struct AnomalyScoreSet {
    /// `(node, sigma)` sorted by sigma descending, node id ascending on ties.
    pub entries: Vec<(NodeId, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnomalyError {
    /// Feature values are missing for visited nodes with positive mass.
    MissingFeatures { missing: Vec<NodeId>, total: usize },
    KOutOfRange { k: usize, len: usize },
}

impl fmt::Display for AnomalyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnomalyError::MissingFeatures { missing, total } => {
                write!(f, "{total} scored nodes lack a feature value (first: ")?;
                for (i, v) in missing.iter().take(8).enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            AnomalyError::KOutOfRange { k, len } => {
                write!(f, "k = {k} outside 1..={len}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AnomalyError {}

/// Sort `(node, score)` pairs into ranking order: score descending,
/// node id ascending on ties.
pub fn rank_descending(entries: &mut [(NodeId, f64)]) {
    entries.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// `sigma(v) = pi_scaled(v) / f(v)` over the visited set.
///
/// Every visited node with positive mass must have a feature value; visited
/// nodes absent from the feature set are only tolerated at zero mass and
/// score 0 there.
pub fn anomaly_scores(
    pps: &PprScoreSet,
    pfs: &PatternFeatureSet,
) -> Result<AnomalyScoreSet, AnomalyError> {
    let n = pps.aggregate_scaled.len();
    let mut f_of = vec![f64::NAN; n];
    for (i, &v) in pfs.nodes.iter().enumerate() {
        if (v as usize) < n {
            f_of[v as usize] = pfs.f_values[i];
        }
    }
    let missing: Vec<NodeId> = pps
        .visited
        .iter()
        .copied()
        .filter(|&v| pps.aggregate_raw[v as usize] > 0.0 && f_of[v as usize].is_nan())
        .collect();
    if !missing.is_empty() {
        let total = missing.len();
        return Err(AnomalyError::MissingFeatures { missing, total });
    }
    let mut entries: Vec<(NodeId, f64)> = pps
        .visited
        .iter()
        .map(|&v| {
            let f = f_of[v as usize];
            let sigma = if f.is_nan() { 0.0 } else { pps.aggregate_scaled[v as usize] / f };
            (v, sigma)
        })
        .collect();
    rank_descending(&mut entries);
    Ok(AnomalyScoreSet { entries })
}

impl AnomalyScoreSet {
    /// First `k` entries of the ranking, `1 <= k <= len`.
    pub fn top_k(&self, k: usize) -> Result<&[(NodeId, f64)], AnomalyError> {
        if k == 0 || k > self.entries.len() {
            return Err(AnomalyError::KOutOfRange { k, len: self.entries.len() });
        }
        Ok(&self.entries[..k])
    }

    pub fn ranking(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|&(v, _)| v)
    }
}
