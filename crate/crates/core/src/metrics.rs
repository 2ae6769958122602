//! Ranking metrics: precision/recall at K, rank-K accuracy and F1, AUC.

use alloc::vec::Vec;
use core::fmt;

use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    KOutOfRange { k: usize, len: usize },
    NoPositives,
    OneClassOnly,
    UnlabeledNode(NodeId),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::KOutOfRange { k, len } => write!(f, "k = {k} outside 1..={len}"),
            MetricsError::NoPositives => {
                write!(f, "no positive labels in the evaluated set; recall is undefined")
            }
            MetricsError::OneClassOnly => {
                write!(f, "AUC needs both classes present")
            }
            MetricsError::UnlabeledNode(v) => write!(f, "ranked node {v} has no label"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MetricsError {}

fn check_labels(ranking: &[NodeId], labels: &[Option<bool>]) -> Result<(), MetricsError> {
    for &v in ranking {
        match labels.get(v as usize) {
            Some(Some(_)) => {}
            _ => return Err(MetricsError::UnlabeledNode(v)),
        }
    }
    Ok(())
}

fn true_positives_in_top_k(ranking: &[NodeId], labels: &[Option<bool>], k: usize) -> usize {
    ranking[..k].iter().filter(|&&v| labels[v as usize] == Some(true)).count()
}

/// Fraction of the top `k` that are true anomalies.
pub fn precision_at_k(
    ranking: &[NodeId],
    labels: &[Option<bool>],
    k: usize,
) -> Result<f64, MetricsError> {
    if k == 0 || k > ranking.len() {
        return Err(MetricsError::KOutOfRange { k, len: ranking.len() });
    }
    check_labels(ranking, labels)?;
    Ok(true_positives_in_top_k(ranking, labels, k) as f64 / k as f64)
}

/// Fraction of all anomalies in the ranked set captured by the top `k`.
/// Errors when the ranked set has no positives at all.
pub fn recall_at_k(
    ranking: &[NodeId],
    labels: &[Option<bool>],
    k: usize,
) -> Result<f64, MetricsError> {
    if k == 0 || k > ranking.len() {
        return Err(MetricsError::KOutOfRange { k, len: ranking.len() });
    }
    check_labels(ranking, labels)?;
    let positives = ranking.iter().filter(|&&v| labels[v as usize] == Some(true)).count();
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }
    Ok(true_positives_in_top_k(ranking, labels, k) as f64 / positives as f64)
}

/// Accuracy with the top `k` treated as the predicted-positive set.
pub fn accuracy_at_k(
    ranking: &[NodeId],
    labels: &[Option<bool>],
    k: usize,
) -> Result<f64, MetricsError> {
    if k == 0 || k > ranking.len() {
        return Err(MetricsError::KOutOfRange { k, len: ranking.len() });
    }
    check_labels(ranking, labels)?;
    let tp = true_positives_in_top_k(ranking, labels, k);
    let positives = ranking.iter().filter(|&&v| labels[v as usize] == Some(true)).count();
    let missed = positives - tp;
    let tn = ranking.len() - k - missed;
    Ok((tp + tn) as f64 / ranking.len() as f64)
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Probability that a random positive outscores a random negative, ties at
/// half credit. Computed by rank summation (Mann-Whitney U); equals pairwise
/// enumeration exactly.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    assert_eq!(scores.len(), labels.len());
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::OneClassOnly);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks over tie groups, 1-based
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lbl(flags: &[i8]) -> Vec<Option<bool>> {
        flags
            .iter()
            .map(|&f| match f {
                0 => Some(false),
                1 => Some(true),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn precision_recall_hand_counts() {
        // ranking [a, b, c, d], positives {a, c}, k = 2
        let ranking = [0u32, 1, 2, 3];
        let labels = lbl(&[1, 0, 1, 0]);
        assert_eq!(precision_at_k(&ranking, &labels, 2).unwrap(), 0.5);
        assert_eq!(recall_at_k(&ranking, &labels, 2).unwrap(), 0.5);
    }

    #[test]
    fn all_positives_in_top_k() {
        let ranking = [5u32, 4, 0, 1];
        let labels = lbl(&[0, 0, -1, -1, 1, 1]);
        assert_eq!(precision_at_k(&ranking, &labels, 2).unwrap(), 1.0);
        assert_eq!(recall_at_k(&ranking, &labels, 2).unwrap(), 1.0);
    }

    #[test]
    fn precision_equals_recall_at_positive_count() {
        let ranking = [0u32, 1, 2, 3, 4];
        let labels = lbl(&[0, 1, 1, 0, 1]);
        let k = 3; // number of positives
        assert_eq!(
            precision_at_k(&ranking, &labels, k).unwrap(),
            recall_at_k(&ranking, &labels, k).unwrap()
        );
    }

    #[test]
    fn recall_errors_without_positives() {
        let ranking = [0u32, 1];
        let labels = lbl(&[0, 0]);
        assert_eq!(recall_at_k(&ranking, &labels, 1), Err(MetricsError::NoPositives));
    }

    #[test]
    fn k_bounds_checked() {
        let ranking = [0u32, 1];
        let labels = lbl(&[1, 0]);
        assert!(precision_at_k(&ranking, &labels, 0).is_err());
        assert!(precision_at_k(&ranking, &labels, 3).is_err());
    }

    #[test]
    fn unlabeled_node_rejected() {
        let ranking = [0u32, 1];
        let labels = lbl(&[1, -1]);
        assert_eq!(
            precision_at_k(&ranking, &labels, 1),
            Err(MetricsError::UnlabeledNode(1))
        );
    }

    #[test]
    fn accuracy_at_rank_k() {
        // top-2 predicted positive: tp=1 fp=1 fn=1 tn=1 -> acc 0.5
        let ranking = [0u32, 1, 2, 3];
        let labels = lbl(&[1, 0, 1, 0]);
        assert_eq!(accuracy_at_k(&ranking, &labels, 2).unwrap(), 0.5);
    }

    #[test]
    fn f1_harmonic_mean() {
        assert_eq!(f1_score(0.0, 0.0), 0.0);
        assert!((f1_score(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn auc_separated_and_ties() {
        let perfect = auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(perfect, 1.0);
        let all_tied = auc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(all_tied, 0.5);
    }

    #[test]
    fn auc_enumerated_example() {
        // pos {0.9, 0.4}, neg {0.6, 0.1}: wins 3 of 4 pairs -> 0.75
        let scores = [0.9, 0.4, 0.6, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.75);
    }

    #[test]
    fn auc_one_class_errors() {
        assert_eq!(auc(&[0.1, 0.2], &[true, true]), Err(MetricsError::OneClassOnly));
    }
}
