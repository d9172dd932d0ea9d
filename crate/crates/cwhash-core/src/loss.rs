//! Loss mathematics for class-wise hashing.
//!
//! An embedding r is scored against per-class centers μ_i through a softmax
//! over logits z_i = −‖r−μ_i‖²/(2σ²); the loss is the negative log
//! probability of the true class, with the true-class term included in the
//! denominator. Two stage penalties shape the embedding geometry:
//!
//! - **cube penalty** — a linear hinge confining coordinates to [−α, α];
//! - **vertex penalty** — a squared pull toward the nearest hypercube vertex
//!   sign(r), with the sign treated as a constant by the gradient.
//!
//! Center maintenance comes in three flavors: periodic per-class means
//! (clipped to [−α, α]), per-bit majority-voted binary centers (ties to +1),
//! and analytic center gradients for updating centers by SGD alongside the
//! network. A multi-label extension scores samples against the mean of their
//! label set's centers (the "semantic center") with non-label classes as the
//! only negatives.
//!
//! All losses are averaged over the batch, so learning-rate and penalty
//! defaults keep their meaning across batch sizes. All functions here are
//! pure; centers are replaced wholesale on update, never mutated during loss
//! evaluation.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio::atomic_write;

/// Sample label: a single class id or a multi-hot set of class ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelVector {
    /// Single-label sample: one class id in `[0, C)`.
    Class(usize),
    /// Multi-label sample: one flag per class, at least one set.
    MultiHot(Vec<bool>),
}

impl LabelVector {
    /// Checks the label against a class count: ids in range, multi-hot width
    /// exactly `class_count` with at least one set bit.
    pub fn validate(&self, class_count: usize) -> Result<()> {
        match self {
            LabelVector::Class(c) => {
                if *c >= class_count {
                    return Err(Error::Data(format!(
                        "label id {c} out of range for {class_count} classes"
                    )));
                }
            }
            LabelVector::MultiHot(bits) => {
                if bits.len() != class_count {
                    return Err(Error::Data(format!(
                        "multi-hot label has {} entries, expected {class_count}",
                        bits.len()
                    )));
                }
                if !bits.iter().any(|&b| b) {
                    return Err(Error::Data("multi-hot label has no set bits".into()));
                }
            }
        }
        Ok(())
    }

    /// True when the label is multi-hot.
    pub fn is_multi(&self) -> bool {
        matches!(self, LabelVector::MultiHot(_))
    }

    /// True when class `i` belongs to this label.
    pub fn contains(&self, i: usize) -> bool {
        match self {
            LabelVector::Class(c) => *c == i,
            LabelVector::MultiHot(bits) => bits.get(i).copied().unwrap_or(false),
        }
    }

    /// Number of classes in the label (1 for single-label).
    pub fn cardinality(&self) -> usize {
        match self {
            LabelVector::Class(_) => 1,
            LabelVector::MultiHot(bits) => bits.iter().filter(|&&b| b).count(),
        }
    }

    /// Size of the label intersection with `other` — the graded relevance
    /// used by nDCG (1/0 for single-label pairs).
    pub fn intersection_size(&self, other: &LabelVector) -> usize {
        match (self, other) {
            (LabelVector::Class(a), LabelVector::Class(b)) => usize::from(a == b),
            _ => {
                let width = match (self, other) {
                    (LabelVector::MultiHot(a), LabelVector::MultiHot(b)) => a.len().max(b.len()),
                    (LabelVector::MultiHot(a), _) => a.len(),
                    (_, LabelVector::MultiHot(b)) => b.len(),
                    _ => unreachable!(),
                };
                (0..width)
                    .filter(|&i| self.contains(i) && other.contains(i))
                    .count()
            }
        }
    }

    /// True when the two labels share at least one class — the retrieval
    /// relevance rule.
    pub fn shares_label(&self, other: &LabelVector) -> bool {
        self.intersection_size(other) > 0
    }
}

/// How center entries are constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterMode {
    /// Entries are reals in [−α, α].
    Continuous,
    /// Entries are exactly ±1 (majority-voted).
    Binary,
}

/// The per-class center set M = {μ_i}, one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCenters {
    /// C×L center matrix.
    pub centers: Array2<f64>,
    pub mode: CenterMode,
}

#[derive(Serialize, Deserialize)]
struct CentersFile {
    mode: String,
    class_count: usize,
    code_length: usize,
    centers: Vec<Vec<f64>>,
}

impl ClassCenters {
    pub fn class_count(&self) -> usize {
        self.centers.nrows()
    }

    pub fn code_length(&self) -> usize {
        self.centers.ncols()
    }

    /// Writes the centers as a JSON artifact (atomic).
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = CentersFile {
            mode: match self.mode {
                CenterMode::Continuous => "continuous".into(),
                CenterMode::Binary => "binary".into(),
            },
            class_count: self.class_count(),
            code_length: self.code_length(),
            centers: self.centers.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&file)
            .map_err(|e| Error::Data(format!("centers serialization failed: {e}")))?;
        bytes.push(b'\n');
        atomic_write(path, &bytes)
    }

    /// Reads a centers JSON artifact, validating mode, shape, and values.
    pub fn read_json(path: &Path) -> Result<ClassCenters> {
        let bytes = std::fs::read(path)?;
        let file: CentersFile = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Data(format!("centers file malformed: {e}")))?;
        let mode = match file.mode.as_str() {
            "continuous" => CenterMode::Continuous,
            "binary" => CenterMode::Binary,
            other => return Err(Error::Data(format!("unknown center mode {other:?}"))),
        };
        if file.centers.len() != file.class_count {
            return Err(Error::Data(format!(
                "centers file declares {} classes but holds {} rows",
                file.class_count,
                file.centers.len()
            )));
        }
        let mut centers = Array2::zeros((file.class_count, file.code_length));
        for (i, row) in file.centers.iter().enumerate() {
            if row.len() != file.code_length {
                return Err(Error::Data(format!(
                    "center row {i} has {} entries, expected {}",
                    row.len(),
                    file.code_length
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "center entry ({i},{j}) is not finite"
                    )));
                }
                if mode == CenterMode::Binary && v != 1.0 && v != -1.0 {
                    return Err(Error::Data(format!(
                        "binary center entry ({i},{j}) is {v}, expected ±1"
                    )));
                }
                centers[[i, j]] = v;
            }
        }
        Ok(ClassCenters { centers, mode })
    }
}

/// Hyperparameters of the loss and its stage penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Gaussian variance σ² of the logits.
    pub sigma_sq: f64,
    /// Cube half-width α (slightly above 1).
    pub alpha: f64,
    /// Cube-penalty weight η₁ (stage I).
    pub eta1: f64,
    /// Vertex-penalty weight η₂ (stage II).
    pub eta2: f64,
    /// Code length L (embedding width).
    pub code_length: usize,
    /// Number of classes C.
    pub class_count: usize,
}

impl LossConfig {
    /// Default σ² for multi-label datasets regardless of code length.
    pub const MULTILABEL_SIGMA_SQ: f64 = 1.0;

    /// Defaults for a given code length and class count:
    /// σ² from [`LossConfig::default_sigma_sq`], α = 1.1, η₁ = 10, η₂ = 0.01.
    pub fn new(code_length: usize, class_count: usize) -> LossConfig {
        LossConfig {
            sigma_sq: LossConfig::default_sigma_sq(code_length),
            alpha: 1.1,
            eta1: 10.0,
            eta2: 0.01,
            code_length,
            class_count,
        }
    }

    /// Default σ² keyed by code length: 0.5 up to 24 bits, 1 for 32–48,
    /// 2 from 64 up. Lengths between table rows take the next lower row.
    pub fn default_sigma_sq(bits: usize) -> f64 {
        if bits < 32 {
            0.5
        } else if bits < 64 {
            1.0
        } else {
            2.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_sq.is_nan() || self.sigma_sq <= 0.0 {
            return Err(Error::Config(format!(
                "sigma_sq must be > 0, got {}",
                self.sigma_sq
            )));
        }
        if self.alpha.is_nan() || self.alpha < 1.0 {
            return Err(Error::Config(format!(
                "alpha must be >= 1, got {}",
                self.alpha
            )));
        }
        if self.eta1.is_nan() || self.eta1 < 0.0 || self.eta2.is_nan() || self.eta2 < 0.0 {
            return Err(Error::Config(format!(
                "penalty weights must be >= 0, got eta1={} eta2={}",
                self.eta1, self.eta2
            )));
        }
        if self.code_length == 0 {
            return Err(Error::Config("code_length must be positive".into()));
        }
        if self.class_count == 0 {
            return Err(Error::Config("class_count must be positive".into()));
        }
        Ok(())
    }
}

fn check_batch(
    embeddings: &Array2<f64>,
    labels: &[LabelVector],
    cfg: &LossConfig,
) -> Result<()> {
    cfg.validate()?;
    if embeddings.nrows() == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    if embeddings.ncols() != cfg.code_length {
        return Err(Error::Config(format!(
            "embedding width {} != code length {}",
            embeddings.ncols(),
            cfg.code_length
        )));
    }
    if labels.len() != embeddings.nrows() {
        return Err(Error::Config(format!(
            "{} labels for {} embeddings",
            labels.len(),
            embeddings.nrows()
        )));
    }
    for label in labels {
        label.validate(cfg.class_count)?;
    }
    Ok(())
}

fn check_centers(centers: &ClassCenters, cfg: &LossConfig) -> Result<()> {
    if centers.class_count() != cfg.class_count || centers.code_length() != cfg.code_length {
        return Err(Error::Config(format!(
            "centers are {}x{}, config expects {}x{}",
            centers.class_count(),
            centers.code_length(),
            cfg.class_count,
            cfg.code_length
        )));
    }
    Ok(())
}

/// Squared Euclidean distance between an embedding row and a center row.
fn sq_dist(r: ndarray::ArrayView1<f64>, mu: ndarray::ArrayView1<f64>) -> f64 {
    r.iter()
        .zip(mu.iter())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum()
}

/// Softmax probabilities over logits with max subtraction; returns the
/// probabilities and log(Σ exp(z−m)) + m − z_target, i.e. −log p_target.
fn softmax_neg_log(logits: &[f64], target: usize) -> (Vec<f64>, f64) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    let neg_log = sum.ln() - (logits[target] - m);
    (probs, neg_log)
}

/// Class-wise loss and its embedding gradient.
///
/// Per sample: ℓ = −log softmax(z)_y with z_i = −‖r−μ_i‖²/(2σ²); the
/// returned loss is the batch mean and the gradient is the batch-mean
/// analytic derivative (Σ_i p_i μ_i − μ_y)/σ² per sample. Max-logit
/// subtraction keeps both finite for arbitrarily large distances.
pub fn classwise_loss_grad(
    embeddings: &Array2<f64>,
    labels: &[LabelVector],
    centers: &ClassCenters,
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    check_batch(embeddings, labels, cfg)?;
    check_centers(centers, cfg)?;
    let batch = embeddings.nrows();
    let inv_b = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(embeddings.raw_dim());
    for (n, label) in labels.iter().enumerate() {
        let y = match label {
            LabelVector::Class(c) => *c,
            LabelVector::MultiHot(_) => {
                return Err(Error::Config(
                    "classwise loss is single-label; use multilabel_loss_grad".into(),
                ))
            }
        };
        let r = embeddings.row(n);
        let logits: Vec<f64> = (0..cfg.class_count)
            .map(|i| -sq_dist(r, centers.centers.row(i)) / (2.0 * cfg.sigma_sq))
            .collect();
        let (probs, neg_log) = softmax_neg_log(&logits, y);
        loss += neg_log;
        // ∂ℓ/∂r = (Σ_i p_i μ_i − μ_y) / σ²
        let mut g = grad.row_mut(n);
        for (i, &p) in probs.iter().enumerate() {
            let mu = centers.centers.row(i);
            for (gk, &mk) in g.iter_mut().zip(mu.iter()) {
                *gk += p * mk;
            }
        }
        let mu_y = centers.centers.row(y);
        for (gk, &mk) in g.iter_mut().zip(mu_y.iter()) {
            *gk = (*gk - mk) / cfg.sigma_sq * inv_b;
        }
    }
    loss *= inv_b;
    if !loss.is_finite() {
        return Err(Error::Numerical("classwise loss is not finite".into()));
    }
    Ok((loss, grad))
}

/// Stage-I cube penalty: a linear hinge on every coordinate outside [−α, α],
/// weighted η₁ and averaged over the batch. The subgradient at the kink
/// (|r| = α exactly) is 0.
pub fn cube_penalty_grad(embeddings: &Array2<f64>, cfg: &LossConfig) -> Result<(f64, Array2<f64>)> {
    cfg.validate()?;
    if embeddings.nrows() == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    let scale = cfg.eta1 / embeddings.nrows() as f64;
    let mut sum = 0.0;
    let mut grad = Array2::zeros(embeddings.raw_dim());
    for (g, &v) in grad.iter_mut().zip(embeddings.iter()) {
        if v > cfg.alpha {
            sum += v - cfg.alpha;
            *g = scale;
        } else if v < -cfg.alpha {
            sum += -cfg.alpha - v;
            *g = -scale;
        }
    }
    Ok((scale * sum, grad))
}

/// Stage-II vertex penalty: squared distance to the nearest hypercube vertex
/// b = sign(r) (sign(0) = +1), weighted η₂ and averaged over the batch. The
/// gradient treats b as constant: ∂/∂r = (2η₂/B)(r − b).
pub fn vertex_penalty_grad(
    embeddings: &Array2<f64>,
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    cfg.validate()?;
    if embeddings.nrows() == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    let scale = cfg.eta2 / embeddings.nrows() as f64;
    let mut sum = 0.0;
    let mut grad = Array2::zeros(embeddings.raw_dim());
    for (g, &v) in grad.iter_mut().zip(embeddings.iter()) {
        let b = if v >= 0.0 { 1.0 } else { -1.0 };
        sum += (b - v) * (b - v);
        *g = 2.0 * scale * (v - b);
    }
    Ok((scale * sum, grad))
}

/// Per-class mean centers over the full training set, clipped to [−α, α].
/// Single-label datasets only; every class must have at least one sample.
pub fn update_centers(
    embeddings_full: &Array2<f64>,
    labels: &[LabelVector],
    class_count: usize,
    alpha: f64,
) -> Result<ClassCenters> {
    if labels.len() != embeddings_full.nrows() {
        return Err(Error::Config(format!(
            "{} labels for {} embeddings",
            labels.len(),
            embeddings_full.nrows()
        )));
    }
    let code_length = embeddings_full.ncols();
    let mut sums = Array2::<f64>::zeros((class_count, code_length));
    let mut counts = vec![0usize; class_count];
    for (n, label) in labels.iter().enumerate() {
        label.validate(class_count)?;
        let c = match label {
            LabelVector::Class(c) => *c,
            LabelVector::MultiHot(_) => {
                return Err(Error::Config(
                    "update_centers is single-label; use update_centers_multilabel".into(),
                ))
            }
        };
        let mut row = sums.row_mut(c);
        row += &embeddings_full.row(n);
        counts[c] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} has no samples")));
    }
    for (c, mut row) in sums.rows_mut().into_iter().enumerate() {
        let inv = 1.0 / counts[c] as f64;
        row.mapv_inplace(|v| (v * inv).clamp(-alpha, alpha));
    }
    Ok(ClassCenters {
        centers: sums,
        mode: CenterMode::Continuous,
    })
}

/// Majority-voted binary centers: per class and bit, sum the sample signs
/// (sign(0) = +1) and emit +1 when the sum is ≥ 0, else −1. Multi-label
/// samples vote for every class in their label set.
pub fn binarize_centers(
    embeddings_full: &Array2<f64>,
    labels: &[LabelVector],
    class_count: usize,
) -> Result<ClassCenters> {
    if labels.len() != embeddings_full.nrows() {
        return Err(Error::Config(format!(
            "{} labels for {} embeddings",
            labels.len(),
            embeddings_full.nrows()
        )));
    }
    let code_length = embeddings_full.ncols();
    let mut votes = Array2::<f64>::zeros((class_count, code_length));
    let mut counts = vec![0usize; class_count];
    for (n, label) in labels.iter().enumerate() {
        label.validate(class_count)?;
        for (c, count) in counts.iter_mut().enumerate() {
            if !label.contains(c) {
                continue;
            }
            *count += 1;
            let mut row = votes.row_mut(c);
            for (vk, &rk) in row.iter_mut().zip(embeddings_full.row(n).iter()) {
                *vk += if rk >= 0.0 { 1.0 } else { -1.0 };
            }
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} has no samples")));
    }
    votes.mapv_inplace(|s| if s >= 0.0 { 1.0 } else { -1.0 });
    Ok(ClassCenters {
        centers: votes,
        mode: CenterMode::Binary,
    })
}

/// Semantic center of a label set: the mean of the set's class centers.
/// A single-label input returns that class's center unchanged.
pub fn semantic_center(label: &LabelVector, centers: &ClassCenters) -> Result<Array1<f64>> {
    label.validate(centers.class_count())?;
    let mut acc = Array1::<f64>::zeros(centers.code_length());
    let mut count = 0usize;
    for c in 0..centers.class_count() {
        if label.contains(c) {
            acc += &centers.centers.row(c);
            count += 1;
        }
    }
    acc /= count as f64;
    Ok(acc)
}

/// Multi-label loss and its embedding gradient.
///
/// Per sample with label set S: the positive candidate is the semantic
/// center μ̂ = mean of {μ_i : i ∈ S}; the denominator adds only the classes
/// outside S. μ̂ is treated as a constant of the batch, so the gradient is
/// (1/σ²)[(1−p̂)(r−μ̂) − Σ_{i∉S} p_i (r−μ_i)], averaged over the batch.
/// Single-label inputs reduce exactly to [`classwise_loss_grad`].
pub fn multilabel_loss_grad(
    embeddings: &Array2<f64>,
    labels: &[LabelVector],
    centers: &ClassCenters,
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    check_batch(embeddings, labels, cfg)?;
    check_centers(centers, cfg)?;
    let batch = embeddings.nrows();
    let inv_b = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(embeddings.raw_dim());
    for (n, label) in labels.iter().enumerate() {
        let r = embeddings.row(n);
        let mu_hat = semantic_center(label, centers)?;
        let negatives: Vec<usize> = (0..cfg.class_count)
            .filter(|&i| !label.contains(i))
            .collect();
        let mut logits = Vec::with_capacity(negatives.len() + 1);
        logits.push(-sq_dist(r, mu_hat.view()) / (2.0 * cfg.sigma_sq));
        for &i in &negatives {
            logits.push(-sq_dist(r, centers.centers.row(i)) / (2.0 * cfg.sigma_sq));
        }
        let (probs, neg_log) = softmax_neg_log(&logits, 0);
        loss += neg_log;
        let mut g = grad.row_mut(n);
        let p_hat = probs[0];
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = (1.0 - p_hat) * (r[k] - mu_hat[k]);
        }
        for (j, &i) in negatives.iter().enumerate() {
            let p = probs[j + 1];
            let mu = centers.centers.row(i);
            for (k, gk) in g.iter_mut().enumerate() {
                *gk -= p * (r[k] - mu[k]);
            }
        }
        g.mapv_inplace(|v| v / cfg.sigma_sq * inv_b);
    }
    loss *= inv_b;
    if !loss.is_finite() {
        return Err(Error::Numerical("multi-label loss is not finite".into()));
    }
    Ok((loss, grad))
}

/// Weighted-mean multi-label centers, clipped to [−α, α]: each sample
/// contributes r/‖l‖₁ to every class in its label set, normalized by the
/// class's occurrence count. Single-label datasets reduce to the plain
/// per-class means.
pub fn update_centers_multilabel(
    embeddings_full: &Array2<f64>,
    labels: &[LabelVector],
    class_count: usize,
    alpha: f64,
) -> Result<ClassCenters> {
    if labels.len() != embeddings_full.nrows() {
        return Err(Error::Config(format!(
            "{} labels for {} embeddings",
            labels.len(),
            embeddings_full.nrows()
        )));
    }
    let code_length = embeddings_full.ncols();
    let mut sums = Array2::<f64>::zeros((class_count, code_length));
    let mut counts = vec![0usize; class_count];
    for (n, label) in labels.iter().enumerate() {
        label.validate(class_count)?;
        let weight = 1.0 / label.cardinality() as f64;
        for (c, count) in counts.iter_mut().enumerate() {
            if !label.contains(c) {
                continue;
            }
            *count += 1;
            let mut row = sums.row_mut(c);
            for (sk, &rk) in row.iter_mut().zip(embeddings_full.row(n).iter()) {
                *sk += weight * rk;
            }
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} has no samples")));
    }
    for (c, mut row) in sums.rows_mut().into_iter().enumerate() {
        let inv = 1.0 / counts[c] as f64;
        row.mapv_inplace(|v| (v * inv).clamp(-alpha, alpha));
    }
    Ok(ClassCenters {
        centers: sums,
        mode: CenterMode::Continuous,
    })
}

/// Analytic gradient of the batch class-wise loss with respect to every
/// center: ∂ℓ/∂μ_i = (p_i − [i = y])(r − μ_i)/σ² per sample, batch-averaged.
/// Summed over classes this equals the negated sum of the embedding
/// gradients (the loss depends only on differences r − μ).
pub fn center_gradients(
    embeddings: &Array2<f64>,
    labels: &[LabelVector],
    centers: &ClassCenters,
    cfg: &LossConfig,
) -> Result<Array2<f64>> {
    check_batch(embeddings, labels, cfg)?;
    check_centers(centers, cfg)?;
    let inv_b = 1.0 / embeddings.nrows() as f64;
    let mut grad = Array2::<f64>::zeros((cfg.class_count, cfg.code_length));
    for (n, label) in labels.iter().enumerate() {
        let y = match label {
            LabelVector::Class(c) => *c,
            LabelVector::MultiHot(_) => {
                return Err(Error::Config(
                    "center gradients are defined for single-label data".into(),
                ))
            }
        };
        let r = embeddings.row(n);
        let logits: Vec<f64> = (0..cfg.class_count)
            .map(|i| -sq_dist(r, centers.centers.row(i)) / (2.0 * cfg.sigma_sq))
            .collect();
        let (probs, _) = softmax_neg_log(&logits, y);
        for (i, &p) in probs.iter().enumerate() {
            let coeff = (p - f64::from(u8::from(i == y))) / cfg.sigma_sq * inv_b;
            let mu = centers.centers.row(i);
            let mut gi = grad.row_mut(i);
            for (k, gk) in gi.iter_mut().enumerate() {
                *gk += coeff * (r[k] - mu[k]);
            }
        }
    }
    Ok(grad)
}

/// Mean squared distance from each embedding to its nearest hypercube
/// vertex: (1/N)·Σ_n ‖sign(r_n) − r_n‖², with sign(0) = +1.
pub fn mean_quantization_error(embeddings: &Array2<f64>) -> f64 {
    if embeddings.nrows() == 0 {
        return 0.0;
    }
    let sum: f64 = embeddings
        .iter()
        .map(|&v| {
            let b = if v >= 0.0 { 1.0 } else { -1.0 };
            (b - v) * (b - v)
        })
        .sum();
    sum / embeddings.nrows() as f64
}

/// Mean over classes of the within-class variance (mean squared distance of
/// a class's embeddings to their own mean). Multi-label samples count toward
/// every class in their label set.
pub fn intra_class_variance(
    embeddings: &Array2<f64>,
    labels: &[LabelVector],
    class_count: usize,
) -> Result<f64> {
    if labels.len() != embeddings.nrows() {
        return Err(Error::Config(format!(
            "{} labels for {} embeddings",
            labels.len(),
            embeddings.nrows()
        )));
    }
    let code_length = embeddings.ncols();
    let mut sums = Array2::<f64>::zeros((class_count, code_length));
    let mut counts = vec![0usize; class_count];
    for (n, label) in labels.iter().enumerate() {
        label.validate(class_count)?;
        for (c, count) in counts.iter_mut().enumerate() {
            if label.contains(c) {
                let mut row = sums.row_mut(c);
                row += &embeddings.row(n);
                *count += 1;
            }
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} has no samples")));
    }
    for (c, mut row) in sums.rows_mut().into_iter().enumerate() {
        row /= counts[c] as f64;
    }
    let mut acc = vec![0.0; class_count];
    for (n, label) in labels.iter().enumerate() {
        for (c, a) in acc.iter_mut().enumerate() {
            if label.contains(c) {
                *a += sq_dist(embeddings.row(n), sums.row(c));
            }
        }
    }
    let mean_var = acc
        .iter()
        .zip(&counts)
        .map(|(&a, &n)| a / n as f64)
        .sum::<f64>()
        / class_count as f64;
    Ok(mean_var)
}

/// Mean Euclidean distance between distinct center pairs; 0 with fewer than
/// two classes.
pub fn mean_center_distance(centers: &ClassCenters) -> f64 {
    let c = centers.class_count();
    if c < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..c {
        for j in i + 1..c {
            sum += sq_dist(centers.centers.row(i), centers.centers.row(j)).sqrt();
            pairs += 1;
        }
    }
    sum / pairs as f64
}
