//! Fusion of the two behavioral scores into a per-node suspicion feature.
//!
//! A binary L2-regularized logistic regression is trained on
//! `[theta_norm, omega_norm]` with inverse-frequency class weights (all
//! reference datasets are heavily imbalanced). The value consumed by the
//! anomaly score is the model's benign-class probability, floored at
//! [`F_VALUE_FLOOR`], so that dividing by it amplifies suspicious nodes.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::behavior::ScoreMap;
use crate::graph::NodeId;
use crate::rng;

/// Lower clamp for the benign-class probability.
pub const F_VALUE_FLOOR: f64 = 1e-6;

pub const FEATURE_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub node: NodeId,
    /// `[theta_norm, omega_norm]`, each in [0, 1].
    pub features: [f64; FEATURE_DIM],
    /// Ground truth when known, `true` = illicit.
    pub label: Option<bool>,
}

/// Trained model parameters. `schema` versions the feature layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub schema: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub reg_strength: f64,
    pub iter_cap: u32,
    pub seed: u64,
}

/// Benign-class probabilities per node, clamped to `[F_VALUE_FLOOR, 1]`.
#[derive(Debug, Clone)]
pub struct PatternFeatureSet {
    pub nodes: Vec<NodeId>,
    pub f_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// (train, validation, test) fractions, summing to 1.
    pub fractions: (f64, f64, f64),
    pub seed: u64,
    pub iter_cap: u32,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    /// Candidate regularization strengths, picked on the validation fold.
    pub reg_grid: Vec<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            fractions: (0.8, 0.1, 0.1),
            seed: 0,
            iter_cap: 1000,
            grad_tol: 1e-6,
            reg_grid: vec![0.01, 0.1, 1.0],
        }
    }
}

/// Row indices of each fold, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifyError {
    InconsistentNodeSets { node: NodeId, missing_from_theta: bool },
    UnlabeledRow(NodeId),
    InvalidSplit { train: f64, val: f64, test: f64 },
    EmptyTrainingSet,
    SingleClassTrainingFold,
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for ClassifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifyError::InconsistentNodeSets { node, missing_from_theta } => {
                let side = if *missing_from_theta { "timestamp" } else { "weight" };
                write!(f, "node {node} missing from the {side} score map")
            }
            ClassifyError::UnlabeledRow(v) => write!(f, "row for node {v} carries no label"),
            ClassifyError::InvalidSplit { train, val, test } => {
                write!(f, "split fractions ({train}, {val}, {test}) must be non-negative, sum to 1, and train must be > 0")
            }
            ClassifyError::EmptyTrainingSet => write!(f, "no rows to train on"),
            ClassifyError::SingleClassTrainingFold => write!(
                f,
                "training fold contains a single class; resample with stratification or more data"
            ),
            ClassifyError::DimensionMismatch { expected, got } => {
                write!(f, "model expects {expected} features, rows have {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ClassifyError {}

/// Zip the two score maps into feature rows, one per scored node.
///
/// The maps must cover the same node set (order-insensitive); `label_of`
/// attaches ground truth where it exists.
pub fn build_features(
    theta: &ScoreMap,
    omega: &ScoreMap,
    label_of: impl Fn(NodeId) -> Option<bool>,
) -> Result<Vec<FeatureRow>, ClassifyError> {
    let aligned: Vec<(NodeId, f64, f64)> = if theta.nodes == omega.nodes {
        theta
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, theta.norm[i], omega.norm[i]))
            .collect()
    } else {
        let omega_index: BTreeMap<NodeId, f64> =
            omega.nodes.iter().copied().zip(omega.norm.iter().copied()).collect();
        for &v in &omega.nodes {
            if !theta.nodes.contains(&v) {
                return Err(ClassifyError::InconsistentNodeSets {
                    node: v,
                    missing_from_theta: true,
                });
            }
        }
        theta
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                omega_index
                    .get(&v)
                    .map(|&w| (v, theta.norm[i], w))
                    .ok_or(ClassifyError::InconsistentNodeSets { node: v, missing_from_theta: false })
            })
            .collect::<Result<_, _>>()?
    };
    Ok(aligned
        .into_iter()
        .map(|(v, t, w)| FeatureRow { node: v, features: [t, w], label: label_of(v) })
        .collect())
}

/// Seeded stratified split: positives and negatives are shuffled separately
/// and partitioned by the given fractions. Fold indices come back ascending.
pub fn stratified_split(
    labels: &[bool],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitIndices, ClassifyError> {
    let (ft, fv, fs) = fractions;
    let valid = ft > 0.0
        && fv >= 0.0
        && fs >= 0.0
        && ((ft + fv + fs) - 1.0).abs() <= 1e-9;
    if !valid {
        return Err(ClassifyError::InvalidSplit { train: ft, val: fv, test: fs });
    }
    let mut rng_state = rng::stream(seed);
    let mut split = SplitIndices { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for class in [true, false] {
        let mut idx: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rng::shuffle(&mut rng_state, &mut idx);
        let n = idx.len();
        let n_train = libm::round(ft * n as f64) as usize;
        let n_val = (libm::round(fv * n as f64) as usize).min(n - n_train.min(n));
        let n_train = n_train.min(n);
        split.train.extend(&idx[..n_train]);
        split.val.extend(&idx[n_train..n_train + n_val]);
        split.test.extend(&idx[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// Mean weighted log-loss plus ridge penalty on the weights (bias
/// unregularized), and its gradient as `[d/dw.., d/db]`.
///
/// `class_weights` is `(weight of label 1, weight of label 0)`.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    rows: &[([f64; FEATURE_DIM], bool)],
    class_weights: (f64, f64),
    reg_strength: f64,
) -> (f64, Vec<f64>) {
    let n = rows.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; FEATURE_DIM + 1];
    for (x, y) in rows {
        let z = weights.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() + bias;
        let c = if *y { class_weights.0 } else { class_weights.1 };
        let yf = if *y { 1.0 } else { 0.0 };
        loss += c * (softplus(z) - yf * z);
        let err = c * (sigmoid(z) - yf);
        for d in 0..FEATURE_DIM {
            grad[d] += err * x[d];
        }
        grad[FEATURE_DIM] += err;
    }
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    for d in 0..FEATURE_DIM {
        loss += 0.5 * reg_strength * weights[d] * weights[d];
        grad[d] += reg_strength * weights[d];
    }
    (loss, grad)
}

fn hessian(
    weights: &[f64],
    bias: f64,
    rows: &[([f64; FEATURE_DIM], bool)],
    class_weights: (f64, f64),
    reg_strength: f64,
) -> [[f64; FEATURE_DIM + 1]; FEATURE_DIM + 1] {
    const P: usize = FEATURE_DIM + 1;
    let n = rows.len().max(1) as f64;
    let mut h = [[0.0; P]; P];
    for (x, y) in rows {
        let z = weights.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() + bias;
        let c = if *y { class_weights.0 } else { class_weights.1 };
        let p = sigmoid(z);
        let s = c * p * (1.0 - p);
        let mut ext = [0.0; P];
        ext[..FEATURE_DIM].copy_from_slice(x);
        ext[FEATURE_DIM] = 1.0;
        for i in 0..P {
            for j in 0..P {
                h[i][j] += s * ext[i] * ext[j];
            }
        }
    }
    for row in h.iter_mut() {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    for (d, row) in h.iter_mut().enumerate().take(FEATURE_DIM) {
        row[d] += reg_strength;
    }
    // Tiny damping keeps the solve well-posed when the curvature flattens.
    for (d, row) in h.iter_mut().enumerate() {
        row[d] += 1e-9;
    }
    h
}

/// Solve `m * x = rhs` by Gaussian elimination with partial pivoting.
fn solve_small(
    mut m: [[f64; FEATURE_DIM + 1]; FEATURE_DIM + 1],
    mut rhs: [f64; FEATURE_DIM + 1],
) -> Option<[f64; FEATURE_DIM + 1]> {
    const P: usize = FEATURE_DIM + 1;
    for col in 0..P {
        let pivot = (col..P).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..P {
            let f = m[row][col] / m[col][col];
            for k in col..P {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; P];
    for col in (0..P).rev() {
        let mut acc = rhs[col];
        for k in col + 1..P {
            acc -= m[col][k] * x[k];
        }
        x[col] = acc / m[col][col];
    }
    Some(x)
}

/// Damped Newton fit of the regularized weighted log-loss. Deterministic;
/// each accepted step never increases the loss.
pub fn fit_logistic(
    rows: &[([f64; FEATURE_DIM], bool)],
    class_weights: (f64, f64),
    reg_strength: f64,
    iter_cap: u32,
    grad_tol: f64,
) -> (Vec<f64>, f64) {
    let mut weights = vec![0.0; FEATURE_DIM];
    let mut bias = 0.0;
    let (mut loss, mut grad) =
        loss_and_gradient(&weights, bias, rows, class_weights, reg_strength);
    for _ in 0..iter_cap {
        let gnorm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
        if gnorm <= grad_tol {
            break;
        }
        let h = hessian(&weights, bias, rows, class_weights, reg_strength);
        let mut rhs = [0.0; FEATURE_DIM + 1];
        rhs.copy_from_slice(&grad);
        let Some(delta) = solve_small(h, rhs) else { break };
        let mut step = 1.0;
        loop {
            let cand_w: Vec<f64> =
                weights.iter().zip(delta.iter()).map(|(w, d)| w - step * d).collect();
            let cand_b = bias - step * delta[FEATURE_DIM];
            let (cand_loss, cand_grad) =
                loss_and_gradient(&cand_w, cand_b, rows, class_weights, reg_strength);
            if cand_loss <= loss + 1e-12 {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                grad = cand_grad;
                break;
            }
            step *= 0.5;
            if step < 1e-8 {
                return (weights, bias);
            }
        }
    }
    (weights, bias)
}

/// Inverse-frequency class weights `n / (2 * n_class)` over the given rows.
pub fn inverse_frequency_weights(rows: &[([f64; FEATURE_DIM], bool)]) -> (f64, f64) {
    let n = rows.len() as f64;
    let pos = rows.iter().filter(|(_, y)| *y).count() as f64;
    let neg = n - pos;
    let w_pos = if pos > 0.0 { n / (2.0 * pos) } else { 1.0 };
    let w_neg = if neg > 0.0 { n / (2.0 * neg) } else { 1.0 };
    (w_pos, w_neg)
}

/// Balanced log-loss on a held-out fold: per-class mean loss averaged over
/// the classes present. Used to pick the regularization strength.
fn balanced_holdout_loss(
    weights: &[f64],
    bias: f64,
    rows: &[([f64; FEATURE_DIM], bool)],
) -> f64 {
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (x, y) in rows {
        let z = weights.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() + bias;
        let yf = if *y { 1.0 } else { 0.0 };
        let k = usize::from(*y);
        sums[k] += softplus(z) - yf * z;
        counts[k] += 1;
    }
    let mut total = 0.0;
    let mut classes = 0;
    for k in 0..2 {
        if counts[k] > 0 {
            total += sums[k] / counts[k] as f64;
            classes += 1;
        }
    }
    if classes == 0 {
        0.0
    } else {
        total / classes as f64
    }
}

/// Split the labeled rows, fit one model per grid value of the
/// regularization strength, and keep the one with the best validation loss.
/// Returns the model together with the fold assignment used.
pub fn train(
    rows: &[FeatureRow],
    opts: &TrainOptions,
) -> Result<(LogisticModel, SplitIndices), ClassifyError> {
    if rows.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    let mut labels = Vec::with_capacity(rows.len());
    for r in rows {
        match r.label {
            Some(l) => labels.push(l),
            None => return Err(ClassifyError::UnlabeledRow(r.node)),
        }
    }
    let split = stratified_split(&labels, opts.fractions, opts.seed)?;
    let fold = |idx: &[usize]| -> Vec<([f64; FEATURE_DIM], bool)> {
        idx.iter().map(|&i| (rows[i].features, labels[i])).collect()
    };
    let train_rows = fold(&split.train);
    let val_rows = fold(&split.val);
    let has_pos = train_rows.iter().any(|(_, y)| *y);
    let has_neg = train_rows.iter().any(|(_, y)| !*y);
    if !(has_pos && has_neg) {
        return Err(ClassifyError::SingleClassTrainingFold);
    }
    let class_weights = inverse_frequency_weights(&train_rows);

    let mut best: Option<(f64, f64, Vec<f64>, f64)> = None; // (score, reg, w, b)
    for &reg in &opts.reg_grid {
        let (w, b) =
            fit_logistic(&train_rows, class_weights, reg, opts.iter_cap, opts.grad_tol);
        let score = if val_rows.is_empty() {
            balanced_holdout_loss(&w, b, &train_rows)
        } else {
            balanced_holdout_loss(&w, b, &val_rows)
        };
        if best.as_ref().map_or(true, |(s, ..)| score < *s) {
            best = Some((score, reg, w, b));
        }
    }
    let (_, reg_strength, weights, bias) = best.expect("non-empty grid");
    Ok((
        LogisticModel {
            schema: 1,
            weights,
            bias,
            reg_strength,
            iter_cap: opts.iter_cap,
            seed: opts.seed,
        },
        split,
    ))
}

/// Probability of the illicit class for one feature vector.
pub fn predict_illicit(model: &LogisticModel, features: &[f64]) -> f64 {
    let z = model
        .weights
        .iter()
        .zip(features.iter())
        .map(|(w, v)| w * v)
        .sum::<f64>()
        + model.bias;
    sigmoid(z)
}

/// Benign-class probability per row, clamped to `[F_VALUE_FLOOR, 1]`.
/// Suspicious nodes end up with small values so that dividing the PageRank
/// mass by them amplifies the anomaly score.
pub fn predict_f(
    model: &LogisticModel,
    rows: &[FeatureRow],
) -> Result<PatternFeatureSet, ClassifyError> {
    if model.weights.len() != FEATURE_DIM {
        return Err(ClassifyError::DimensionMismatch {
            expected: FEATURE_DIM,
            got: model.weights.len(),
        });
    }
    let mut nodes = Vec::with_capacity(rows.len());
    let mut f_values = Vec::with_capacity(rows.len());
    for r in rows {
        let benign = 1.0 - predict_illicit(model, &r.features);
        nodes.push(r.node);
        f_values.push(benign.clamp(F_VALUE_FLOOR, 1.0));
    }
    Ok(PatternFeatureSet { nodes, f_values })
}
