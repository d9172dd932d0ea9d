//! Synthetic labeled datasets, train/query/database splits, and the DCW1
//! dataset file format.
//!
//! Generation draws isotropic Gaussian clusters whose centers sit on a
//! seeded sphere of radius 10·spread, so classes are well separated at any
//! scale. Multi-label clusters are placed at the mean of their member-class
//! centers and carry the full label set. Everything is a pure function of
//! (config, seed).
//!
//! Splits follow two retrieval protocols: in the first, every non-query
//! sample is both training set and database; in the second, the training
//! set is a seeded subset of the database.
//!
//! # Dataset file format (DCW1)
//!
//! | field      | type                        | notes                          |
//! |------------|-----------------------------|--------------------------------|
//! | magic      | `b"DCW1"`                   |                                |
//! | version    | u32                         | currently 1                    |
//! | count      | u32                         | sample count N                 |
//! | dim        | u32                         | feature dimension d            |
//! | classes    | u32                         | class count C                  |
//! | label mode | u8                          | 0 single-label, 1 multi-label  |
//! | features   | N×d f64, row-major          |                                |
//! | labels     | N × u32, or N × ⌈C/8⌉ bytes | class id, or multi-hot bitmap  |
//!
//! Multi-byte values are little-endian. Multi-hot bitmaps store class j at
//! bit j%8 of byte j/8; padding bits are zero.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fsio::{atomic_write, Reader, Writer};
use crate::loss::LabelVector;

const DCW1_MAGIC: &[u8; 4] = b"DCW1";
const DCW1_VERSION: u32 = 1;

/// Whether every sample carries one class id or a multi-hot label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    SingleLabel,
    MultiLabel,
}

impl LabelMode {
    fn tag(self) -> u8 {
        match self {
            LabelMode::SingleLabel => 0,
            LabelMode::MultiLabel => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<LabelMode> {
        match tag {
            0 => Ok(LabelMode::SingleLabel),
            1 => Ok(LabelMode::MultiLabel),
            other => Err(Error::Data(format!("bad label mode byte: {other}"))),
        }
    }
}

/// Feature rows with one label per row.
///
/// May be empty (a split with no query samples produces an empty query
/// set); generators always produce at least one row per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<LabelVector>,
    class_count: usize,
    label_mode: LabelMode,
}

impl LabeledDataset {
    /// Validates shapes, label ranges, mode consistency, and feature
    /// finiteness.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<LabelVector>,
        class_count: usize,
        label_mode: LabelMode,
    ) -> Result<LabeledDataset> {
        if class_count == 0 {
            return Err(Error::Data("dataset needs at least one class".into()));
        }
        if labels.len() != features.nrows() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        for (n, label) in labels.iter().enumerate() {
            label.validate(class_count)?;
            let is_multi = label.is_multi();
            if is_multi != (label_mode == LabelMode::MultiLabel) {
                return Err(Error::Data(format!(
                    "label at row {n} does not match the dataset's label mode"
                )));
            }
        }
        for ((n, j), &v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite feature at row {n}, column {j}"
                )));
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            class_count,
            label_mode,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[LabelVector] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn label_mode(&self) -> LabelMode {
        self.label_mode
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// The dataset restricted to the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<LabeledDataset> {
        for &r in rows {
            if r >= self.len() {
                return Err(Error::Data(format!(
                    "subset row {r} out of range for {} samples",
                    self.len()
                )));
            }
        }
        Ok(LabeledDataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r].clone()).collect(),
            class_count: self.class_count,
            label_mode: self.label_mode,
        })
    }
}

/// Cluster centers on the sphere of radius 10·spread: seeded standard
/// normal directions, normalized and scaled. The same (classes, dim,
/// spread, seed) always yields the same centers.
pub fn blob_centers(classes: usize, dim: usize, spread: f64, seed: u64) -> Result<Array2<f64>> {
    check_gen_args(classes, 1, dim, spread)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_centers(classes, dim, spread, &mut rng))
}

fn draw_centers(classes: usize, dim: usize, spread: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let radius = 10.0 * spread;
    let mut centers = Array2::zeros((classes, dim));
    for c in 0..classes {
        loop {
            let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-9 {
                for (j, v) in dir.iter().enumerate() {
                    centers[[c, j]] = v / norm * radius;
                }
                break;
            }
        }
    }
    centers
}

fn check_gen_args(classes: usize, per_cluster: usize, dim: usize, spread: f64) -> Result<()> {
    if classes == 0 {
        return Err(Error::Config("class count must be >= 1".into()));
    }
    if per_cluster == 0 {
        return Err(Error::Config("samples per cluster must be >= 1".into()));
    }
    if dim == 0 {
        return Err(Error::Config("feature dimension must be >= 1".into()));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::Config(format!(
            "spread must be positive and finite, got {spread}"
        )));
    }
    Ok(())
}

/// One isotropic Gaussian cluster per class: `per_class` samples of
/// `center + spread·N(0, I)` each, labeled with their class, rows grouped
/// by class in class order.
pub fn gen_blobs(
    classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    check_gen_args(classes, per_class, dim, spread)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = draw_centers(classes, dim, spread, &mut rng);
    let mut features = Array2::zeros((classes * per_class, dim));
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        for s in 0..per_class {
            let n = c * per_class + s;
            for j in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                features[[n, j]] = centers[[c, j]] + spread * noise;
            }
            labels.push(LabelVector::Class(c));
        }
    }
    LabeledDataset::new(features, labels, classes, LabelMode::SingleLabel)
}

/// One Gaussian cluster per label combination, centered at the mean of the
/// member classes' single-class centers; every sample carries the combo's
/// multi-hot label. Class centers are drawn exactly as in [`gen_blobs`], so
/// all-singleton combos reproduce its geometry.
pub fn gen_multilabel_blobs(
    classes: usize,
    per_combo: usize,
    dim: usize,
    combos: &[Vec<usize>],
    spread: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    check_gen_args(classes, per_combo, dim, spread)?;
    if combos.is_empty() {
        return Err(Error::Config("at least one label combination required".into()));
    }
    for (i, combo) in combos.iter().enumerate() {
        if combo.is_empty() {
            return Err(Error::Config(format!("label combination {i} is empty")));
        }
        for &c in combo {
            if c >= classes {
                return Err(Error::Config(format!(
                    "label combination {i} references class {c}, but only {classes} classes exist"
                )));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = draw_centers(classes, dim, spread, &mut rng);
    let mut features = Array2::zeros((combos.len() * per_combo, dim));
    let mut labels = Vec::with_capacity(combos.len() * per_combo);
    for (g, combo) in combos.iter().enumerate() {
        let mut hot = vec![false; classes];
        for &c in combo {
            hot[c] = true;
        }
        let members = hot.iter().filter(|&&b| b).count() as f64;
        let mut center = vec![0.0; dim];
        for (c, &set) in hot.iter().enumerate() {
            if set {
                for (j, v) in center.iter_mut().enumerate() {
                    *v += centers[[c, j]] / members;
                }
            }
        }
        for s in 0..per_combo {
            let n = g * per_combo + s;
            for j in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                features[[n, j]] = center[j] + spread * noise;
            }
            labels.push(LabelVector::MultiHot(hot.clone()));
        }
    }
    LabeledDataset::new(features, labels, classes, LabelMode::MultiLabel)
}

/// How many samples a split draws for a role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCount {
    /// Draw this many samples from every class (single-label data only).
    PerClass(usize),
    /// Draw this many samples uniformly over the whole set.
    Total(usize),
}

/// Seeded split into query, database, and training roles.
///
/// With `train: None`, every non-query sample is both database and training
/// set. With `train: Some(count)`, the database is still all non-query
/// samples but training uses only a seeded subset of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub query: SplitCount,
    pub train: Option<SplitCount>,
    pub seed: u64,
}

/// Splits into `(train, query, database)`. Query and database partition
/// the input; `train` is the database or a subset of it, and never overlaps
/// the query set. Row order within each part follows the input.
pub fn split(
    dataset: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let all: Vec<usize> = (0..dataset.len()).collect();
    let query_rows = pick(dataset, &all, spec.query, "query", &mut rng)?;
    let in_query = row_mask(dataset.len(), &query_rows);
    let db_rows: Vec<usize> = all.iter().copied().filter(|&r| !in_query[r]).collect();
    let train_rows = match spec.train {
        None => db_rows.clone(),
        Some(count) => pick(dataset, &db_rows, count, "train", &mut rng)?,
    };
    Ok((
        dataset.subset(&train_rows)?,
        dataset.subset(&query_rows)?,
        dataset.subset(&db_rows)?,
    ))
}

fn row_mask(len: usize, rows: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; len];
    for &r in rows {
        mask[r] = true;
    }
    mask
}

/// Draws `count` rows from `pool` without replacement (uniform, seeded) and
/// returns them in ascending order.
fn sample_rows(pool: &[usize], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pool = pool.to_vec();
    for i in 0..count {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut chosen = pool[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

fn pick(
    dataset: &LabeledDataset,
    pool: &[usize],
    count: SplitCount,
    role: &str,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    match count {
        SplitCount::Total(n) => {
            if n > pool.len() {
                return Err(Error::Config(format!(
                    "{role} split wants {n} samples but only {} are available",
                    pool.len()
                )));
            }
            Ok(sample_rows(pool, n, rng))
        }
        SplitCount::PerClass(q) => {
            if dataset.label_mode() == LabelMode::MultiLabel {
                return Err(Error::Config(format!(
                    "per-class {role} counts require single-label data; use a total count"
                )));
            }
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_count()];
            for &r in pool {
                if let LabelVector::Class(c) = dataset.labels()[r] {
                    by_class[c].push(r);
                }
            }
            let mut chosen = Vec::with_capacity(q * dataset.class_count());
            for (c, rows) in by_class.iter().enumerate() {
                if q > rows.len() {
                    return Err(Error::Config(format!(
                        "class {c} has {} samples available but the {role} split wants {q}",
                        rows.len()
                    )));
                }
                chosen.extend(sample_rows(rows, q, rng));
            }
            chosen.sort_unstable();
            Ok(chosen)
        }
    }
}

/// Writes the dataset in the DCW1 format (atomic).
pub fn write_dataset(path: &Path, dataset: &LabeledDataset) -> Result<()> {
    let mut w = Writer::new(DCW1_MAGIC, DCW1_VERSION);
    w.u32(dataset.len() as u32);
    w.u32(dataset.dim() as u32);
    w.u32(dataset.class_count() as u32);
    w.u8(dataset.label_mode().tag());
    for &v in dataset.features().iter() {
        w.f64(v);
    }
    match dataset.label_mode() {
        LabelMode::SingleLabel => {
            for label in dataset.labels() {
                if let LabelVector::Class(c) = label {
                    w.u32(*c as u32);
                }
            }
        }
        LabelMode::MultiLabel => {
            let bytes_per_row = dataset.class_count().div_ceil(8);
            for label in dataset.labels() {
                if let LabelVector::MultiHot(hot) = label {
                    let mut row = vec![0u8; bytes_per_row];
                    for (c, &set) in hot.iter().enumerate() {
                        if set {
                            row[c / 8] |= 1 << (c % 8);
                        }
                    }
                    w.buf.extend_from_slice(&row);
                }
            }
        }
    }
    atomic_write(path, &w.buf)
}

/// Reads a DCW1 dataset, validating magic, version, label mode, label
/// ranges, and feature finiteness.
pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let buf = std::fs::read(path)?;
    let mut r = Reader::new(&buf, "DCW1");
    r.magic(DCW1_MAGIC)?;
    let version = r.u32()?;
    if version != DCW1_VERSION {
        return Err(Error::Data(format!(
            "unsupported dataset version {version} (expected {DCW1_VERSION})"
        )));
    }
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let class_count = r.u32()? as usize;
    let mode = LabelMode::from_tag(r.u8()?)?;
    let mut features = Array2::zeros((count, dim));
    for n in 0..count {
        for j in 0..dim {
            features[[n, j]] = r.f64()?;
        }
    }
    let mut labels = Vec::with_capacity(count);
    match mode {
        LabelMode::SingleLabel => {
            for n in 0..count {
                let c = r.u32()? as usize;
                if c >= class_count {
                    return Err(Error::Data(format!(
                        "label id {c} out of range for {class_count} classes at row {n}"
                    )));
                }
                labels.push(LabelVector::Class(c));
            }
        }
        LabelMode::MultiLabel => {
            let bytes_per_row = class_count.div_ceil(8);
            for n in 0..count {
                let row = r.bytes(bytes_per_row)?.to_vec();
                let mut hot = vec![false; class_count];
                for (c, bit) in hot.iter_mut().enumerate() {
                    *bit = row[c / 8] >> (c % 8) & 1 == 1;
                }
                for (j, &byte) in row.iter().enumerate() {
                    let used = (class_count - j * 8).min(8);
                    if used < 8 && byte >> used != 0 {
                        return Err(Error::Data(format!(
                            "nonzero padding bits in the label bitmap at row {n}"
                        )));
                    }
                }
                if !hot.iter().any(|&b| b) {
                    return Err(Error::Data(format!("label bitmap at row {n} has no classes set")));
                }
                labels.push(LabelVector::MultiHot(hot));
            }
        }
    }
    r.finish()?;
    LabeledDataset::new(features, labels, class_count, mode)
}
