//! Minimal dense feedforward network with explicit forward pass, backward
//! pass, and SGD with weight decay.
//!
//! The network maps input vectors to L-dimensional continuous embeddings.
//! Everything is 64-bit floating point so analytic gradients can be checked
//! against central finite differences at tight tolerances; binary codes are
//! produced downstream by taking signs, so no precision is lost there.
//!
//! # Checkpoint format ("DCWN")
//!
//! | Field        | Type                 | Notes                            |
//! |--------------|----------------------|----------------------------------|
//! | magic        | 4 bytes `"DCWN"`     |                                  |
//! | version      | u32                  | currently 1                      |
//! | layer count  | u32                  |                                  |
//! | per layer:   |                      |                                  |
//! |   in         | u32                  | input width                      |
//! |   out        | u32                  | output width                     |
//! |   activation | u8                   | 0 = none, 1 = relu               |
//! |   weights    | out×in f64           | row-major                        |
//! |   biases     | out f64              |                                  |
//!
//! All integers and floats little-endian.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fsio::{atomic_write, Reader, Writer};

const DCWN_MAGIC: &[u8; 4] = b"DCWN";
const DCWN_VERSION: u32 = 1;

/// Per-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// Identity: the layer output is the affine map itself.
    None,
    /// Elementwise `max(0, x)`.
    Relu,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::None => 0,
            Activation::Relu => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::None),
            1 => Ok(Activation::Relu),
            t => Err(Error::Data(format!("unknown activation tag {t}"))),
        }
    }

    fn apply(self, pre: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::None => pre.clone(),
            Activation::Relu => pre.mapv(|v| v.max(0.0)),
        }
    }

    /// Derivative with respect to the pre-activation, evaluated elementwise.
    /// The relu subgradient at 0 is taken as 0.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One affine layer: `y = act(x · Wᵀ + b)`, with `W` stored `out×in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// A chain of affine layers ending in an identity activation, mapping
/// `input_dim` features to `output_dim` (code length) embedding coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingNet {
    layers: Vec<Layer>,
}

/// Activation record produced by [`EmbeddingNet::forward`], sufficient to run
/// [`EmbeddingNet::backward`] without recomputation.
pub struct ForwardCache {
    /// Input to each layer (the batch itself for layer 0).
    layer_inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each layer.
    pre_activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    fn batch_size(&self) -> usize {
        self.layer_inputs[0].nrows()
    }
}

/// Per-layer parameter gradients, shape-congruent with an [`EmbeddingNet`].
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl GradientSet {
    /// All-zero gradients matching `net`'s shapes.
    pub fn zeros_like(net: &EmbeddingNet) -> Self {
        GradientSet {
            weights: net
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| Array1::zeros(l.biases.raw_dim()))
                .collect(),
        }
    }

    /// Accumulates `other` into `self` (used for deterministic shard
    /// reduction; shards are added in shard-index order).
    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    /// Multiplies every gradient entry by `c`.
    pub fn scale(&mut self, c: f64) {
        for w in &mut self.weights {
            *w *= c;
        }
        for b in &mut self.biases {
            *b *= c;
        }
    }
}

/// Builds a network from a layer-dimension list, e.g. `[16, 64, 64, 8]`.
///
/// Hidden layers use relu; the final layer is identity so embeddings can
/// reach negative coordinates. Weights are drawn uniformly from
/// `[-limit, limit)` with `limit = sqrt(6 / (fan_in + fan_out))`; biases are
/// zero. Deterministic for a fixed seed.
pub fn init_net(dims: &[usize], seed: u64) -> Result<EmbeddingNet> {
    if dims.len() < 2 {
        return Err(Error::Config(format!(
            "layer spec needs at least input and output dims, got {dims:?}"
        )));
    }
    if let Some(pos) = dims.iter().position(|&d| d == 0) {
        return Err(Error::Config(format!(
            "layer dimension must be positive, got 0 at position {pos}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (k, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights =
            Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..limit));
        let activation = if k + 2 == dims.len() {
            Activation::None
        } else {
            Activation::Relu
        };
        layers.push(Layer {
            weights,
            biases: Array1::zeros(fan_out),
            activation,
        });
    }
    EmbeddingNet::from_layers(layers)
}

impl EmbeddingNet {
    /// Assembles a network from explicit layers, validating the dimension
    /// chain, the identity final activation, and parameter finiteness.
    pub fn from_layers(layers: Vec<Layer>) -> Result<EmbeddingNet> {
        if layers.is_empty() {
            return Err(Error::Config("network must have at least one layer".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.biases.len() != layer.output_dim() {
                return Err(Error::Config(format!(
                    "layer {k}: bias length {} != output dim {}",
                    layer.biases.len(),
                    layer.output_dim()
                )));
            }
            if k + 1 < layers.len() && layer.output_dim() != layers[k + 1].input_dim() {
                return Err(Error::Config(format!(
                    "layer {k} output dim {} does not chain into layer {} input dim {}",
                    layer.output_dim(),
                    k + 1,
                    layers[k + 1].input_dim()
                )));
            }
            let finite = layer.weights.iter().all(|v| v.is_finite())
                && layer.biases.iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::Config(format!(
                    "layer {k} contains non-finite parameters"
                )));
            }
        }
        if layers.last().unwrap().activation != Activation::None {
            return Err(Error::Config(
                "final layer activation must be identity".into(),
            ));
        }
        Ok(EmbeddingNet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    /// Embedding width, i.e. the code length L.
    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    /// Runs the batch through the layer chain, returning embeddings and the
    /// activation record needed by [`EmbeddingNet::backward`].
    pub fn forward(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Config(format!(
                "batch width {} != network input dim {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        let mut cache = ForwardCache {
            layer_inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
        };
        let mut x = batch.to_owned();
        for layer in &self.layers {
            let pre = x.dot(&layer.weights.t()) + &layer.biases;
            let out = layer.activation.apply(&pre);
            cache.layer_inputs.push(x);
            cache.pre_activations.push(pre);
            x = out;
        }
        Ok((x, cache))
    }

    /// Forward pass without the activation record, for encoding and center
    /// refreshes where no backward pass follows.
    pub fn embed(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Config(format!(
                "batch width {} != network input dim {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        let mut x = batch.to_owned();
        for layer in &self.layers {
            let pre = x.dot(&layer.weights.t()) + &layer.biases;
            x = layer.activation.apply(&pre);
        }
        Ok(x)
    }

    /// Backpropagates `grad_embeddings` (∂loss/∂embedding, shape B×L) through
    /// the recorded activations, returning ∂loss/∂Θ.
    ///
    /// The result is linear in `grad_embeddings`; any batch averaging is the
    /// caller's choice of upstream gradient scaling.
    pub fn backward(&self, cache: &ForwardCache, grad_embeddings: &Array2<f64>) -> Result<GradientSet> {
        if cache.layer_inputs.len() != self.layers.len() {
            return Err(Error::Config(format!(
                "cache has {} layers, network has {}",
                cache.layer_inputs.len(),
                self.layers.len()
            )));
        }
        let expect = (cache.batch_size(), self.output_dim());
        if grad_embeddings.dim() != expect {
            return Err(Error::Config(format!(
                "gradient shape {:?} != expected {:?}",
                grad_embeddings.dim(),
                expect
            )));
        }
        let mut weights = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut biases = vec![Array1::zeros(0); self.layers.len()];
        let mut g = grad_embeddings.to_owned();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre_activations[k];
            let mut dpre = g;
            dpre.zip_mut_with(pre, |gv, &pv| *gv *= layer.activation.derivative(pv));
            weights[k] = dpre.t().dot(&cache.layer_inputs[k]);
            biases[k] = dpre.sum_axis(Axis(0));
            g = dpre.dot(&layer.weights);
        }
        Ok(GradientSet { weights, biases })
    }

    /// One SGD step: `w ← w − lr·(g + weight_decay·w)`; biases are exempt
    /// from decay (`b ← b − lr·g`).
    pub fn sgd_step(&mut self, grads: &GradientSet, lr: f64, weight_decay: f64) -> Result<()> {
        if lr.is_nan() || lr <= 0.0 {
            return Err(Error::Config(format!("learning rate must be > 0, got {lr}")));
        }
        if weight_decay.is_nan() || weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight decay must be >= 0, got {weight_decay}"
            )));
        }
        if grads.weights.len() != self.layers.len() {
            return Err(Error::Config(format!(
                "gradient set has {} layers, network has {}",
                grads.weights.len(),
                self.layers.len()
            )));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if grads.weights[k].raw_dim() != layer.weights.raw_dim()
                || grads.biases[k].raw_dim() != layer.biases.raw_dim()
            {
                return Err(Error::Config(format!(
                    "gradient shapes for layer {k} do not match the network"
                )));
            }
            let finite = grads.weights[k].iter().all(|v| v.is_finite())
                && grads.biases[k].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::Numerical(format!(
                    "non-finite gradient in layer {k}"
                )));
            }
        }
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            layer
                .weights
                .zip_mut_with(gw, |w, &g| *w -= lr * (g + weight_decay * *w));
            layer.biases.zip_mut_with(gb, |b, &g| *b -= lr * g);
        }
        Ok(())
    }

    /// Serializes the network to the DCWN checkpoint format atomically.
    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let mut w = Writer::new(DCWN_MAGIC, DCWN_VERSION);
        w.u32(self.layers.len() as u32);
        for layer in &self.layers {
            w.u32(layer.input_dim() as u32);
            w.u32(layer.output_dim() as u32);
            w.u8(layer.activation.tag());
            for v in layer.weights.iter() {
                w.f64(*v);
            }
            for v in layer.biases.iter() {
                w.f64(*v);
            }
        }
        atomic_write(path, &w.buf)
    }

    /// Reads a DCWN checkpoint, validating magic, version, dimensions, the
    /// layer chain, activation tags, and parameter finiteness.
    pub fn read_checkpoint(path: &Path) -> Result<EmbeddingNet> {
        let buf = std::fs::read(path)?;
        let mut r = Reader::new(&buf, "DCWN");
        r.magic(DCWN_MAGIC)?;
        let version = r.u32()?;
        if version != DCWN_VERSION {
            return Err(Error::Data(format!(
                "unsupported DCWN version {version}, expected {DCWN_VERSION}"
            )));
        }
        let layer_count = r.u32()? as usize;
        if layer_count == 0 {
            return Err(Error::Data("checkpoint has zero layers".into()));
        }
        let mut layers = Vec::with_capacity(layer_count);
        for k in 0..layer_count {
            let fan_in = r.u32()? as usize;
            let fan_out = r.u32()? as usize;
            if fan_in == 0 || fan_out == 0 {
                return Err(Error::Data(format!(
                    "layer {k} has zero dimension ({fan_in}x{fan_out})"
                )));
            }
            let activation = Activation::from_tag(r.u8()?)?;
            let mut weights = Array2::zeros((fan_out, fan_in));
            for v in weights.iter_mut() {
                *v = r.f64()?;
            }
            let mut biases = Array1::zeros(fan_out);
            for v in biases.iter_mut() {
                *v = r.f64()?;
            }
            layers.push(Layer {
                weights,
                biases,
                activation,
            });
        }
        r.finish()?;
        // from_layers re-checks the chain and finiteness; remap its
        // config-flavored rejection to a data error since the source here is
        // a file, not caller parameters.
        EmbeddingNet::from_layers(layers).map_err(|e| match e {
            Error::Config(msg) => Error::Data(msg),
            other => other,
        })
    }
}
