//! Two-stage training loop: alternating center refreshes and minibatch
//! SGD steps.
//!
//! Stage one minimizes the class-wise loss plus the cube penalty, keeping
//! embeddings inside [−α, α]^L; stage two starts from the stage-one
//! parameters and swaps in the vertex penalty, pulling embeddings toward
//! the hypercube corners so the final sign binarization loses little.
//!
//! Centers are handled in one of two ways:
//!
//! - **periodic** (default): every `center_update_period` steps the whole
//!   training set is embedded with the current parameters and the centers
//!   are recomputed as clipped class means (majority-voted signs when
//!   stage-two centers are binary). Refreshes never touch the network and
//!   parameter steps never touch the stored centers.
//! - **gradient**: centers are initialized to the class means once and then
//!   updated by SGD on the class-wise loss every step, clipped to [−α, α];
//!   single-label data only.
//!
//! Everything is a pure function of (dataset, config): replaying a config
//! reproduces networks, centers, and logs bitwise. With `threads > 1` a
//! minibatch is split into contiguous shards whose gradients are reduced
//! in a fixed order, so a given thread count is still deterministic.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{encode_embeddings, BinaryCode};
use crate::data::{LabelMode, LabeledDataset};
use crate::error::{Error, Result};
use crate::fsio::atomic_write;
use crate::loss::{
    binarize_centers, center_gradients, classwise_loss_grad, cube_penalty_grad,
    intra_class_variance, mean_center_distance, mean_quantization_error, multilabel_loss_grad,
    update_centers, update_centers_multilabel, vertex_penalty_grad, CenterMode, ClassCenters,
    LabelVector, LossConfig,
};
use crate::net::{init_net, EmbeddingNet, GradientSet};

pub const DEFAULT_LR: f64 = 0.001;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.0005;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_STAGE1_EPOCHS: usize = 30;
pub const DEFAULT_STAGE2_EPOCHS: usize = 15;
pub const DEFAULT_HIDDEN_DIMS: [usize; 2] = [64, 64];

/// How class centers evolve during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterUpdateMode {
    /// Recompute centers from a full forward pass every
    /// `center_update_period` steps.
    Periodic,
    /// Update centers by SGD on the class-wise loss at every step.
    Gradient,
}

/// Everything a training run depends on besides the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossConfig,
    /// SGD learning rate; 0 freezes the network (centers still refresh).
    pub lr: f64,
    /// L2 decay applied to weights only, never biases.
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Steps between center refreshes; `None` means once per epoch,
    /// ⌈N / batch_size⌉ steps.
    pub center_update_period: Option<usize>,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub center_mode: CenterUpdateMode,
    /// Whether stage-two refreshes keep continuous means or binarize them.
    pub stage2_centers: CenterMode,
    /// Hidden layer widths between the input and the L-dimensional output.
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
    /// Worker count for sharding minibatch passes; 1 disables sharding.
    pub threads: usize,
}

impl TrainConfig {
    /// Defaults for every knob except the loss geometry.
    pub fn new(loss: LossConfig) -> TrainConfig {
        TrainConfig {
            loss,
            lr: DEFAULT_LR,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            batch_size: DEFAULT_BATCH_SIZE,
            center_update_period: None,
            stage1_epochs: DEFAULT_STAGE1_EPOCHS,
            stage2_epochs: DEFAULT_STAGE2_EPOCHS,
            center_mode: CenterUpdateMode::Periodic,
            stage2_centers: CenterMode::Continuous,
            hidden_dims: DEFAULT_HIDDEN_DIMS.to_vec(),
            seed: 0,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be nonnegative and finite, got {}",
                self.lr
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight decay must be nonnegative and finite, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.center_update_period == Some(0) {
            return Err(Error::Config("center update period must be >= 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden layer widths must be >= 1".into()));
        }
        if self.center_mode == CenterUpdateMode::Gradient
            && self.stage2_centers == CenterMode::Binary
        {
            return Err(Error::Config(
                "binary stage-two centers require periodic center updates".into(),
            ));
        }
        Ok(())
    }

    /// Layer widths for a fresh network on `input_dim`-wide data.
    pub fn net_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.loss.code_length);
        dims
    }
}

/// One optimizer step's worth of diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based step counter, global across stages in a combined log.
    pub iteration: usize,
    pub stage: u8,
    /// Class-wise loss (excluding the penalty term), minibatch mean.
    pub loss: f64,
    /// The stage's penalty value (cube in stage one, vertex in stage two).
    pub penalty: f64,
    /// Mean squared distance from the minibatch embeddings to their signs.
    pub quant_error: f64,
}

/// Center statistics captured at every refresh boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct RefreshRecord {
    /// Steps completed when the refresh ran (0 = before training).
    pub iteration: usize,
    pub stage: u8,
    pub intra_class_variance: f64,
    pub mean_center_distance: f64,
}

/// Complete training history: per-step records plus per-refresh center
/// statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub iterations: Vec<IterationRecord>,
    pub refreshes: Vec<RefreshRecord>,
}

impl TrainLog {
    /// The last step counter in the log (0 when no steps ran).
    pub fn last_iteration(&self) -> usize {
        self.iterations.last().map_or(0, |r| r.iteration)
    }

    /// Appends `other` with its iteration counters shifted to continue this
    /// log's numbering.
    pub fn concat(mut self, other: TrainLog) -> TrainLog {
        let offset = self.last_iteration();
        self.iterations.extend(other.iterations.into_iter().map(|mut r| {
            r.iteration += offset;
            r
        }));
        self.refreshes.extend(other.refreshes.into_iter().map(|mut r| {
            r.iteration += offset;
            r
        }));
        self
    }

    /// Checks the log's own invariants: strictly increasing step counters,
    /// refresh boundaries ordered by (iteration, stage), and every value
    /// finite.
    pub fn validate(&self) -> Result<()> {
        for pair in self.iterations.windows(2) {
            if pair[1].iteration <= pair[0].iteration {
                return Err(Error::Data(format!(
                    "iteration counter not increasing at {}",
                    pair[1].iteration
                )));
            }
        }
        for r in &self.iterations {
            if !(r.loss.is_finite() && r.penalty.is_finite() && r.quant_error.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite record at iteration {} stage {}",
                    r.iteration, r.stage
                )));
            }
        }
        for pair in self.refreshes.windows(2) {
            if (pair[1].iteration, pair[1].stage) <= (pair[0].iteration, pair[0].stage) {
                return Err(Error::Data(format!(
                    "refresh records out of order at iteration {}",
                    pair[1].iteration
                )));
            }
        }
        for r in &self.refreshes {
            if !(r.intra_class_variance.is_finite() && r.mean_center_distance.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite refresh record at iteration {} stage {}",
                    r.iteration, r.stage
                )));
            }
        }
        Ok(())
    }

    /// Writes the per-step table as CSV:
    /// `iteration,stage,loss,penalty,quant_error`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("iteration,stage,loss,penalty,quant_error\n");
        for r in &self.iterations {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iteration, r.stage, r.loss, r.penalty, r.quant_error
            ));
        }
        atomic_write(path, out.as_bytes())
    }

    /// Writes the refresh table as CSV:
    /// `iteration,stage,intra_class_variance,mean_center_distance`.
    pub fn write_refresh_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("iteration,stage,intra_class_variance,mean_center_distance\n");
        for r in &self.refreshes {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iteration, r.stage, r.intra_class_variance, r.mean_center_distance
            ));
        }
        atomic_write(path, out.as_bytes())
    }
}

fn check_data(net: &EmbeddingNet, data: &LabeledDataset, cfg: &TrainConfig) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if net.input_dim() != data.dim() {
        return Err(Error::Config(format!(
            "network expects input width {}, dataset has {}",
            net.input_dim(),
            data.dim()
        )));
    }
    if net.output_dim() != cfg.loss.code_length {
        return Err(Error::Config(format!(
            "network emits {} dimensions but the code length is {}",
            net.output_dim(),
            cfg.loss.code_length
        )));
    }
    if data.class_count() != cfg.loss.class_count {
        return Err(Error::Config(format!(
            "dataset has {} classes but the loss is configured for {}",
            data.class_count(),
            cfg.loss.class_count
        )));
    }
    if data.label_mode() == LabelMode::MultiLabel && cfg.center_mode == CenterUpdateMode::Gradient
    {
        return Err(Error::Config(
            "gradient center updates require single-label data".into(),
        ));
    }
    Ok(())
}

/// Recomputes centers from full-set embeddings per the stage's policy.
fn make_centers(
    embeddings: &Array2<f64>,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    stage: u8,
) -> Result<ClassCenters> {
    if stage == 2 && cfg.stage2_centers == CenterMode::Binary {
        binarize_centers(embeddings, data.labels(), data.class_count())
    } else if data.label_mode() == LabelMode::MultiLabel {
        update_centers_multilabel(embeddings, data.labels(), data.class_count(), cfg.loss.alpha)
    } else {
        update_centers(embeddings, data.labels(), data.class_count(), cfg.loss.alpha)
    }
}

/// The shuffled row order for one epoch. Keyed by epoch alone (not stage),
/// so a stage-two run walks the same batch sequence a continued stage-one
/// run would.
fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn gather(data: &LabeledDataset, rows: &[usize]) -> (Array2<f64>, Vec<LabelVector>) {
    (
        data.features().select(Axis(0), rows),
        rows.iter().map(|&r| data.labels()[r].clone()).collect(),
    )
}

/// Splits `batch` rows into up to `threads` contiguous shards, none empty.
fn shard_ranges(batch: usize, threads: usize) -> Vec<std::ops::Range<usize>> {
    let workers = threads.min(batch);
    let base = batch / workers;
    let extra = batch % workers;
    let mut ranges = Vec::with_capacity(workers);
    let mut start = 0;
    for w in 0..workers {
        let len = base + usize::from(w < extra);
        ranges.push(start..start + len);
        start += len;
    }
    ranges
}

struct StepOutput {
    loss: f64,
    penalty: f64,
    quant_error: f64,
    grads: GradientSet,
    center_grads: Option<Array2<f64>>,
}

/// Forward, loss, penalty, and backward for one minibatch slice; values are
/// means over the slice.
fn shard_pass(
    net: &EmbeddingNet,
    features: &Array2<f64>,
    labels: &[LabelVector],
    centers: &ClassCenters,
    cfg: &TrainConfig,
    stage: u8,
    multilabel: bool,
) -> Result<StepOutput> {
    let (emb, cache) = net.forward(features)?;
    let (loss, loss_grad) = if multilabel {
        multilabel_loss_grad(&emb, labels, centers, &cfg.loss)?
    } else {
        classwise_loss_grad(&emb, labels, centers, &cfg.loss)?
    };
    let (penalty, penalty_grad) = if stage == 1 {
        cube_penalty_grad(&emb, &cfg.loss)?
    } else {
        vertex_penalty_grad(&emb, &cfg.loss)?
    };
    let quant_error = mean_quantization_error(&emb);
    let grads = net.backward(&cache, &(loss_grad + penalty_grad))?;
    let center_grads = if cfg.center_mode == CenterUpdateMode::Gradient {
        Some(center_gradients(&emb, labels, centers, &cfg.loss)?)
    } else {
        None
    };
    Ok(StepOutput {
        loss,
        penalty,
        quant_error,
        grads,
        center_grads,
    })
}

/// One full minibatch pass, sharded across `cfg.threads` workers when asked.
/// Shard means are rescaled by shard size and reduced in shard order, so the
/// result is the exact batch mean regardless of scheduling.
fn batch_pass(
    net: &EmbeddingNet,
    features: &Array2<f64>,
    labels: &[LabelVector],
    centers: &ClassCenters,
    cfg: &TrainConfig,
    stage: u8,
    multilabel: bool,
) -> Result<StepOutput> {
    let batch = features.nrows();
    if cfg.threads == 1 || batch == 1 {
        return shard_pass(net, features, labels, centers, cfg, stage, multilabel);
    }
    let ranges = shard_ranges(batch, cfg.threads);
    let shards: Vec<Result<(usize, StepOutput)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|range| {
                let range = range.clone();
                scope.spawn(move || {
                    let rows: Vec<usize> = range.clone().collect();
                    let shard_features = features.select(Axis(0), &rows);
                    let out = shard_pass(
                        net,
                        &shard_features,
                        &labels[range.clone()],
                        centers,
                        cfg,
                        stage,
                        multilabel,
                    )?;
                    Ok((range.len(), out))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("shard worker panicked")).collect()
    });
    let mut total = StepOutput {
        loss: 0.0,
        penalty: 0.0,
        quant_error: 0.0,
        grads: GradientSet::zeros_like(net),
        center_grads: (cfg.center_mode == CenterUpdateMode::Gradient)
            .then(|| Array2::zeros((cfg.loss.class_count, cfg.loss.code_length))),
    };
    for shard in shards {
        let (size, mut out) = shard?;
        let weight = size as f64 / batch as f64;
        total.loss += weight * out.loss;
        total.penalty += weight * out.penalty;
        total.quant_error += weight * out.quant_error;
        out.grads.scale(weight);
        total.grads.add_assign(&out.grads);
        if let (Some(acc), Some(cg)) = (total.center_grads.as_mut(), out.center_grads) {
            acc.scaled_add(weight, &cg);
        }
    }
    Ok(total)
}

fn with_step_context(err: Error, iteration: usize, stage: u8) -> Error {
    match err {
        Error::Numerical(msg) => Error::Numerical(format!(
            "at iteration {iteration} stage {stage}: {msg}"
        )),
        other => other,
    }
}

/// The shared alternation: refresh centers, run minibatch steps, repeat.
fn run_stage(
    mut net: EmbeddingNet,
    incoming: Option<ClassCenters>,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    stage: u8,
    epochs: usize,
) -> Result<(EmbeddingNet, ClassCenters, TrainLog)> {
    cfg.validate()?;
    check_data(&net, data, cfg)?;
    let n = data.len();
    let period = cfg
        .center_update_period
        .unwrap_or_else(|| n.div_ceil(cfg.batch_size));
    let multilabel = data.label_mode() == LabelMode::MultiLabel;
    let mut log = TrainLog::default();

    let emb = net.embed(data.features())?;
    let mut centers = match (cfg.center_mode, incoming) {
        // Gradient-updated centers are optimizer state: a later stage keeps
        // them rather than recomputing.
        (CenterUpdateMode::Gradient, Some(c)) => c,
        _ => make_centers(&emb, data, cfg, stage)?,
    };
    log.refreshes.push(RefreshRecord {
        iteration: 0,
        stage,
        intra_class_variance: intra_class_variance(&emb, data.labels(), data.class_count())?,
        mean_center_distance: mean_center_distance(&centers),
    });
    drop(emb);

    let mut iteration = 0usize;
    for epoch in 0..epochs {
        let order = epoch_order(n, cfg.seed, epoch);
        for rows in order.chunks(cfg.batch_size) {
            let (features, labels) = gather(data, rows);
            let step = batch_pass(&net, &features, &labels, &centers, cfg, stage, multilabel)
                .map_err(|e| with_step_context(e, iteration + 1, stage))?;
            if cfg.lr > 0.0 {
                net.sgd_step(&step.grads, cfg.lr, cfg.weight_decay)
                    .map_err(|e| with_step_context(e, iteration + 1, stage))?;
                if let Some(cg) = &step.center_grads {
                    centers.centers.scaled_add(-cfg.lr, cg);
                    centers
                        .centers
                        .mapv_inplace(|v| v.clamp(-cfg.loss.alpha, cfg.loss.alpha));
                }
            }
            iteration += 1;
            log.iterations.push(IterationRecord {
                iteration,
                stage,
                loss: step.loss,
                penalty: step.penalty,
                quant_error: step.quant_error,
            });
            if iteration % period == 0 {
                boundary(&net, data, cfg, stage, iteration, &mut centers, &mut log)?;
            }
        }
    }
    if iteration % period != 0 {
        boundary(&net, data, cfg, stage, iteration, &mut centers, &mut log)?;
    }
    log.validate()?;
    Ok((net, centers, log))
}

/// A refresh boundary: re-embed the training set, recompute centers
/// (periodic mode), and record center statistics.
fn boundary(
    net: &EmbeddingNet,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    stage: u8,
    iteration: usize,
    centers: &mut ClassCenters,
    log: &mut TrainLog,
) -> Result<()> {
    let emb = net.embed(data.features())?;
    if cfg.center_mode == CenterUpdateMode::Periodic {
        *centers = make_centers(&emb, data, cfg, stage)?;
    }
    log.refreshes.push(RefreshRecord {
        iteration,
        stage,
        intra_class_variance: intra_class_variance(&emb, data.labels(), data.class_count())?,
        mean_center_distance: mean_center_distance(centers),
    });
    Ok(())
}

/// Stage one: class-wise loss plus the cube penalty, from a fresh or caller-
/// provided network. With `stage1_epochs = 0` the network is returned
/// untouched and centers are computed once from its embeddings.
pub fn train_stage1(
    net: EmbeddingNet,
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(EmbeddingNet, ClassCenters, TrainLog)> {
    run_stage(net, None, data, cfg, 1, cfg.stage1_epochs)
}

/// Stage two: class-wise loss plus the vertex penalty, initialized from the
/// stage-one network and centers.
pub fn train_stage2(
    net: EmbeddingNet,
    centers: ClassCenters,
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(EmbeddingNet, ClassCenters, TrainLog)> {
    run_stage(net, Some(centers), data, cfg, 2, cfg.stage2_epochs)
}

/// The whole pipeline: initialize a network, run both stages, and encode
/// the training set with the final parameters. The returned log numbers
/// iterations continuously across stages.
pub fn train_full(
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(EmbeddingNet, ClassCenters, TrainLog, Vec<BinaryCode>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let net = init_net(&cfg.net_dims(data.dim()), cfg.seed)?;
    let (net, centers, log1) = train_stage1(net, data, cfg)?;
    let (net, centers, log2) = train_stage2(net, centers, data, cfg)?;
    let log = log1.concat(log2);
    log.validate()?;
    let codes = encode_embeddings(&net.embed(data.features())?);
    Ok((net, centers, log, codes))
}
