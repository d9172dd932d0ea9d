//! Interactive browser front end for the hashing pipeline, compiled to
//! WebAssembly. The embedding width is fixed at 2 so the whole story fits on
//! a canvas: Gaussian blobs in the input plane are pushed toward the corners
//! of the square [−α, α]², first by the cube hinge, then by the vertex
//! penalty, and any point of the plane can be queried by Hamming distance
//! over the resulting 2-bit codes.
//!
//! All logic lives in [`DemoState`], which drives the library's own
//! primitives — forward/backward, the class-wise loss, the stage penalties,
//! center refreshes, and the code/index path — one epoch at a time so a page
//! can animate training. [`Demo`] is the thin wasm-bindgen wrapper around
//! it; the crate also compiles natively, where the unit tests exercise
//! [`DemoState`] without a browser.

use ndarray::{Array2, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use cwhash_core::codec::{encode_embeddings, pack};
use cwhash_core::data::{gen_blobs, LabeledDataset};
use cwhash_core::index::build_index;
use cwhash_core::loss::{
    classwise_loss_grad, cube_penalty_grad, mean_quantization_error, update_centers,
    vertex_penalty_grad, ClassCenters, LabelVector, LossConfig,
};
use cwhash_core::net::{init_net, EmbeddingNet};
use cwhash_core::{Error, Result};

const CODE_LENGTH: usize = 2;
const INPUT_DIM: usize = 2;
const HIDDEN: [usize; 2] = [32, 32];
const BATCH: usize = 32;
const WEIGHT_DECAY: f64 = 0.0005;

/// A live training run over a seeded 2-D blob dataset.
pub struct DemoState {
    data: LabeledDataset,
    net: EmbeddingNet,
    centers: ClassCenters,
    cfg: LossConfig,
    lr: f64,
    seed: u64,
    epoch: usize,
    stage: u8,
    loss_history: Vec<f64>,
    quant_history: Vec<f64>,
}

impl DemoState {
    /// Builds the dataset, initializes the network, and computes the
    /// starting centers. `classes` beyond 4 necessarily collide on the
    /// square's corners — an instructive failure, not a forbidden one.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        classes: usize,
        per_class: usize,
        spread: f64,
        seed: u64,
        sigma_sq: f64,
        eta1: f64,
        eta2: f64,
        lr: f64,
    ) -> Result<DemoState> {
        if lr.is_nan() || lr <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {lr}"
            )));
        }
        let data = gen_blobs(classes, per_class, INPUT_DIM, spread, seed)?;
        let mut cfg = LossConfig::new(CODE_LENGTH, classes);
        cfg.sigma_sq = sigma_sq;
        cfg.eta1 = eta1;
        cfg.eta2 = eta2;
        cfg.validate()?;
        let dims = [&[INPUT_DIM][..], &HIDDEN[..], &[CODE_LENGTH][..]].concat();
        let net = init_net(&dims, seed)?;
        let emb = net.embed(data.features())?;
        let centers = update_centers(&emb, data.labels(), cfg.class_count, cfg.alpha)?;
        Ok(DemoState {
            data,
            net,
            centers,
            cfg,
            lr,
            seed,
            epoch: 0,
            stage: 1,
            loss_history: Vec::new(),
            quant_history: Vec::new(),
        })
    }

    /// Runs `n` training epochs in the current stage: shuffled minibatches,
    /// class-wise loss plus the stage's penalty, SGD, then a center refresh
    /// and one history point per epoch.
    pub fn step_epochs(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            let order = epoch_order(self.data.len(), self.seed, self.epoch);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(BATCH) {
                let batch = self.data.features().select(Axis(0), chunk);
                let labels: Vec<LabelVector> = chunk
                    .iter()
                    .map(|&r| self.data.labels()[r].clone())
                    .collect();
                let (emb, cache) = self.net.forward(&batch)?;
                let (loss, mut grad) =
                    classwise_loss_grad(&emb, &labels, &self.centers, &self.cfg)?;
                let (penalty, pgrad) = if self.stage == 1 {
                    cube_penalty_grad(&emb, &self.cfg)?
                } else {
                    vertex_penalty_grad(&emb, &self.cfg)?
                };
                grad += &pgrad;
                let grads = self.net.backward(&cache, &grad)?;
                self.net.sgd_step(&grads, self.lr, WEIGHT_DECAY)?;
                epoch_loss += loss + penalty;
                batches += 1;
            }
            let emb = self.full_embeddings()?;
            self.centers =
                update_centers(&emb, self.data.labels(), self.cfg.class_count, self.cfg.alpha)?;
            self.loss_history.push(epoch_loss / batches as f64);
            self.quant_history.push(mean_quantization_error(&emb));
            self.epoch += 1;
        }
        Ok(())
    }

    /// Switches between the cube-hinge stage (1) and the vertex stage (2).
    pub fn set_stage(&mut self, stage: u8) -> Result<()> {
        if stage != 1 && stage != 2 {
            return Err(Error::Config(format!("stage must be 1 or 2, got {stage}")));
        }
        self.stage = stage;
        Ok(())
    }

    /// Hamming top-k around the point (x, y) of the embedding plane: the
    /// point is binarized to a 2-bit code and matched against every
    /// sample's code. Returns the winning sample indices.
    pub fn query(&self, x: f64, y: f64, k: usize) -> Result<Vec<u32>> {
        let q = pack(&[sign_of(x), sign_of(y)])?;
        let emb = self.full_embeddings()?;
        let codes = encode_embeddings(&emb);
        let ids: Vec<u32> = (0..self.data.len() as u32).collect();
        let index = build_index(&codes, &ids)?;
        let hits = index.query_topk(&q, k)?;
        Ok(hits.into_iter().map(|(id, _)| id).collect())
    }

    /// Current embeddings, row-major N×2.
    pub fn embeddings(&self) -> Result<Vec<f64>> {
        Ok(self.full_embeddings()?.into_raw_vec_and_offset().0)
    }

    /// Input features, row-major N×2.
    pub fn inputs(&self) -> Vec<f64> {
        self.data.features().to_owned().into_raw_vec_and_offset().0
    }

    /// Class id per sample.
    pub fn labels(&self) -> Vec<u32> {
        self.data
            .labels()
            .iter()
            .map(|l| match l {
                LabelVector::Class(c) => *c as u32,
                LabelVector::MultiHot(_) => 0,
            })
            .collect()
    }

    /// Class centers, row-major C×2.
    pub fn centers(&self) -> Vec<f64> {
        self.centers.centers.clone().into_raw_vec_and_offset().0
    }

    /// 2-bit code value (0..4) per sample under the current network.
    pub fn codes(&self) -> Result<Vec<u32>> {
        let emb = self.full_embeddings()?;
        Ok(encode_embeddings(&emb)
            .iter()
            .map(|c| (c.words()[0] & 0b11) as u32)
            .collect())
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn quant_history(&self) -> &[f64] {
        &self.quant_history
    }

    pub fn alpha(&self) -> f64 {
        self.cfg.alpha
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn stage(&self) -> u8 {
        self.stage
    }

    pub fn class_count(&self) -> usize {
        self.cfg.class_count
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn full_embeddings(&self) -> Result<Array2<f64>> {
        self.net.embed(self.data.features())
    }
}

fn sign_of(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Per-epoch shuffle, seeded the same way for the same epoch index.
fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// The wasm-bindgen face of [`DemoState`]: same operations, with errors
/// surfaced as JavaScript strings.
#[wasm_bindgen]
pub struct Demo {
    state: DemoState,
}

fn js_err(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        classes: u32,
        per_class: u32,
        spread: f64,
        seed: u32,
        sigma_sq: f64,
        eta1: f64,
        eta2: f64,
        lr: f64,
    ) -> std::result::Result<Demo, JsValue> {
        let state = DemoState::new(
            classes as usize,
            per_class as usize,
            spread,
            seed as u64,
            sigma_sq,
            eta1,
            eta2,
            lr,
        )
        .map_err(js_err)?;
        Ok(Demo { state })
    }

    pub fn step_epochs(&mut self, n: u32) -> std::result::Result<(), JsValue> {
        self.state.step_epochs(n as usize).map_err(js_err)
    }

    pub fn set_stage(&mut self, stage: u8) -> std::result::Result<(), JsValue> {
        self.state.set_stage(stage).map_err(js_err)
    }

    pub fn query(&self, x: f64, y: f64, k: u32) -> std::result::Result<Vec<u32>, JsValue> {
        self.state.query(x, y, k as usize).map_err(js_err)
    }

    pub fn embeddings(&self) -> std::result::Result<Vec<f64>, JsValue> {
        self.state.embeddings().map_err(js_err)
    }

    pub fn inputs(&self) -> Vec<f64> {
        self.state.inputs()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.state.labels()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.state.centers()
    }

    pub fn codes(&self) -> std::result::Result<Vec<u32>, JsValue> {
        self.state.codes().map_err(js_err)
    }

    pub fn loss_history(&self) -> Vec<f64> {
        self.state.loss_history().to_vec()
    }

    pub fn quant_history(&self) -> Vec<f64> {
        self.state.quant_history().to_vec()
    }

    pub fn alpha(&self) -> f64 {
        self.state.alpha()
    }

    pub fn epoch(&self) -> u32 {
        self.state.epoch() as u32
    }

    pub fn stage(&self) -> u8 {
        self.state.stage()
    }

    pub fn class_count(&self) -> u32 {
        self.state.class_count() as u32
    }

    #[wasm_bindgen(js_name = sampleCount)]
    pub fn sample_count(&self) -> u32 {
        self.state.len() as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> DemoState {
        DemoState::new(4, 30, 0.6, 7, 1.0, 10.0, 0.01, 0.01).unwrap()
    }

    #[test]
    fn stepping_reduces_the_loss() {
        let mut d = demo();
        d.step_epochs(30).unwrap();
        let h = d.loss_history();
        assert_eq!(h.len(), 30);
        assert!(h[29] < h[0] * 0.5, "loss {} -> {}", h[0], h[29]);
        assert_eq!(d.epoch(), 30);
    }

    #[test]
    fn vertex_stage_pulls_points_toward_corners() {
        let mut d = DemoState::new(4, 30, 0.6, 7, 1.0, 10.0, 0.01, 0.003).unwrap();
        d.step_epochs(10).unwrap();
        let q1 = *d.quant_history().last().unwrap();
        d.set_stage(2).unwrap();
        d.step_epochs(8).unwrap();
        let q2 = *d.quant_history().last().unwrap();
        assert!(q2 < q1, "quantization error {q1} -> {q2}");
    }

    #[test]
    fn query_returns_k_sample_indices() {
        let mut d = demo();
        d.step_epochs(10).unwrap();
        let hits = d.query(0.9, -0.8, 5).unwrap();
        assert_eq!(hits.len(), 5);
        assert!(hits.iter().all(|&id| (id as usize) < d.len()));
    }

    #[test]
    fn exposed_buffers_have_matching_shapes() {
        let d = demo();
        let n = d.len();
        assert_eq!(d.inputs().len(), n * 2);
        assert_eq!(d.embeddings().unwrap().len(), n * 2);
        assert_eq!(d.labels().len(), n);
        assert_eq!(d.codes().unwrap().len(), n);
        assert_eq!(d.centers().len(), d.class_count() * 2);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        assert!(DemoState::new(4, 30, 0.6, 7, 0.0, 10.0, 0.01, 0.01).is_err());
        assert!(DemoState::new(4, 30, 0.6, 7, 1.0, 10.0, 0.01, 0.0).is_err());
        assert!(demo().set_stage(3).is_err());
    }

    #[test]
    fn replaying_the_same_seed_reproduces_the_run() {
        let mut a = demo();
        let mut b = demo();
        a.step_epochs(12).unwrap();
        b.step_epochs(12).unwrap();
        assert_eq!(a.embeddings().unwrap(), b.embeddings().unwrap());
        assert_eq!(a.loss_history(), b.loss_history());
    }
}

