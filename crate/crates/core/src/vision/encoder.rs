//! Gated MLP image encoder, its pretraining loop, and the feature history.

use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::nn::checkpoint::Bundle;
use crate::nn::{Activation, AdamConfig, Grads, Trace};
use crate::seeding::Rng;
use crate::sim::observation::{FEATURE_DIM, HISTORY_LEN};
use crate::vision::frame::{Frame, POOLED_DIM};
use crate::{Adam, Network};

pub const GATED_WIDTH: usize = 128;
pub const BODY_WIDTH: usize = 64;
pub const LABEL_DIM: usize = 3;

/// `f = body(elu(W x + b) ⊙ σ(G x + c))`, with a linear head `f → (δ, x, y)`
/// used only for pretraining. The pooled image enters in an opponent colour
/// basis.
#[derive(Debug, Clone, PartialEq)]
pub struct VisionEncoder {
    pub main: Network,
    pub gate: Network,
    pub body: Network,
    pub head: Network,
}

/// Gradients per sub-network; [`EncoderGrads::into_grads`] lays them out
/// as [`VisionEncoder::param_shapes`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub main: Grads<f64>,
    pub gate: Grads<f64>,
    pub body: Grads<f64>,
    pub head: Grads<f64>,
}

impl EncoderGrads {
    pub fn into_grads(self) -> Grads<f64> {
        self.main.concat(self.gate).concat(self.body).concat(self.head)
    }
}

struct EncoderTrace {
    main: Trace<f64>,
    gate: Trace<f64>,
    body: Trace<f64>,
    head: Trace<f64>,
}

/// Per cell: luma about mid-gray, then the magnitudes of the R−G and G−B
/// opponent channels. Gray pixels (background, noise, arms) carry no chroma,
/// so the last two channels are proportional to the object's share of the
/// cell.
fn centered(pooled: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(pooled.len());
    for c in pooled.chunks_exact(3) {
        out.push((c[0] + c[1] + c[2]) / 3.0 - 0.5);
        out.push((c[0] - c[1]).abs());
        out.push((c[1] - c[2]).abs());
    }
    out
}

impl VisionEncoder {
    pub fn new(rng: &mut Rng) -> Self {
        let main = Network::mlp(&[POOLED_DIM, GATED_WIDTH], Activation::Elu, Activation::Elu, 1.0, rng).expect("static sizes");
        let gate = Network::mlp(&[POOLED_DIM, GATED_WIDTH], Activation::Linear, Activation::Sigmoid, 1.0, rng).expect("static sizes");
        let body = Network::mlp(&[GATED_WIDTH, BODY_WIDTH, FEATURE_DIM], Activation::Elu, Activation::Linear, 1.0, rng).expect("static sizes");
        let head = Network::mlp(&[FEATURE_DIM, LABEL_DIM], Activation::Linear, Activation::Linear, 1.0, rng).expect("static sizes");
        Self { main, gate, body, head }
    }

    fn networks(&self) -> [&Network; 4] {
        [&self.main, &self.gate, &self.body, &self.head]
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.networks().iter().flat_map(|n| n.param_shapes()).collect()
    }

    pub fn param_blocks(&self) -> Vec<&[f64]> {
        self.networks().into_iter().flat_map(|n| n.param_blocks()).collect()
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.main.param_blocks_mut();
        out.extend(self.gate.param_blocks_mut());
        out.extend(self.body.param_blocks_mut());
        out.extend(self.head.param_blocks_mut());
        out
    }

    pub fn zero_grads(&self) -> EncoderGrads {
        EncoderGrads {
            main: self.main.zero_grads(),
            gate: self.gate.zero_grads(),
            body: self.body.zero_grads(),
            head: self.head.zero_grads(),
        }
    }

    fn gated(main: &[f64], gate: &[f64]) -> Vec<f64> {
        main.iter().zip(gate).map(|(m, g)| m * g).collect()
    }

    /// Embedding of a pooled image.
    pub fn embed_pooled(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        check_dim("encoder input", POOLED_DIM, pooled.len())?;
        let x = centered(pooled);
        let h = Self::gated(&self.main.forward(&x)?, &self.gate.forward(&x)?);
        self.body.forward(&h)
    }

    pub fn encode(&self, frame: &Frame) -> Result<Vec<f64>> {
        self.embed_pooled(&frame.pooled())
    }

    /// Head output `(δ, x, y)` for a pooled image.
    pub fn predict_pooled(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        self.head.forward(&self.embed_pooled(pooled)?)
    }

    fn forward_recorded(&self, pooled: &[f64]) -> Result<EncoderTrace> {
        check_dim("encoder input", POOLED_DIM, pooled.len())?;
        let x = centered(pooled);
        let main = self.main.forward_recorded(&x)?;
        let gate = self.gate.forward_recorded(&x)?;
        let h = Self::gated(main.output(), gate.output());
        let body = self.body.forward_recorded(&h)?;
        let head = self.head.forward_recorded(body.output())?;
        Ok(EncoderTrace { main, gate, body, head })
    }

    /// Squared label error `‖head(f) − y‖²` for one sample, with its
    /// gradient accumulated into `grads`.
    pub fn loss_and_grad(&self, pooled: &[f64], labels: &[f64; LABEL_DIM], grads: &mut EncoderGrads) -> Result<f64> {
        let tr = self.forward_recorded(pooled)?;
        let out = tr.head.output();
        let mut loss = 0.0;
        let mut d_out = [0.0; LABEL_DIM];
        for k in 0..LABEL_DIM {
            let e = out[k] - labels[k];
            loss += e * e;
            d_out[k] = 2.0 * e;
        }
        let d_f = self.head.backward_into(&tr.head, &d_out, &mut grads.head)?;
        let d_h = self.body.backward_into(&tr.body, &d_f, &mut grads.body)?;
        let m = tr.main.output();
        let g = tr.gate.output();
        let d_m: Vec<f64> = d_h.iter().zip(g).map(|(d, g)| d * g).collect();
        let d_g: Vec<f64> = d_h.iter().zip(m).map(|(d, m)| d * m).collect();
        self.main.backward_into(&tr.main, &d_m, &mut grads.main)?;
        self.gate.backward_into(&tr.gate, &d_g, &mut grads.gate)?;
        Ok(loss)
    }

    pub fn to_bundle(&self, bundle: &mut Bundle) {
        bundle.put_network("encoder.main", &self.main);
        bundle.put_network("encoder.gate", &self.gate);
        bundle.put_network("encoder.body", &self.body);
        bundle.put_network("encoder.head", &self.head);
    }

    pub fn from_bundle(bundle: &Bundle) -> Result<Self> {
        let enc = Self {
            main: bundle.network("encoder.main")?,
            gate: bundle.network("encoder.gate")?,
            body: bundle.network("encoder.body")?,
            head: bundle.network("encoder.head")?,
        };
        check_dim("encoder input", POOLED_DIM, enc.main.input_dim())?;
        check_dim("encoder gate", GATED_WIDTH, enc.gate.output_dim())?;
        check_dim("encoder embedding", FEATURE_DIM, enc.body.output_dim())?;
        check_dim("encoder head", LABEL_DIM, enc.head.output_dim())?;
        Ok(enc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Probability of showing a training frame with freshly drawn
    /// background noise instead of as rendered.
    pub noise_augment: f64,
    pub noise_std: f64,
    pub background: [f64; 3],
    /// Stop early once this much wall time has elapsed, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_budget: Option<f64>,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1500,
            batch_size: 8,
            learning_rate: 1e-4,
            validation_fraction: 0.2,
            noise_augment: 0.3,
            noise_std: 1.0,
            background: [0.5; 3],
            time_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub initial_validation_loss: f64,
    pub history: Vec<EpochRecord>,
    pub best_epoch: u32,
    pub best_validation_loss: f64,
    pub train_size: usize,
    pub validation_size: usize,
}

/// Pooled image with its mask labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub pooled: Vec<f64>,
    pub labels: [f64; LABEL_DIM],
}

impl LabeledImage {
    pub fn from_frame(frame: &Frame) -> Self {
        Self {
            pooled: frame.pooled(),
            labels: frame.labels().to_array(),
        }
    }
}

pub fn mean_loss(encoder: &VisionEncoder, data: &[LabeledImage]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in data {
        let out = encoder.predict_pooled(&s.pooled)?;
        total += (0..LABEL_DIM).map(|k| (out[k] - s.labels[k]).powi(2)).sum::<f64>();
    }
    Ok(total / data.len() as f64)
}


/// Minibatch Adam on the label MSE. The split into training and validation
/// frames is drawn from `rng`; validation uses the frames as rendered. The
/// returned encoder holds the parameters with the lowest validation loss
/// seen at any epoch end.
pub fn pretrain_encoder(
    frames: &[Frame],
    config: &PretrainConfig,
    rng: &mut Rng,
) -> Result<(VisionEncoder, PretrainReport)> {
    if frames.is_empty() {
        return Err(Error::contract("encoder pretraining needs at least one frame"));
    }
    if config.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.shuffle(rng);
    let n_val = ((frames.len() as f64) * config.validation_fraction).floor() as usize;
    let (val_idx, mut train) = if n_val == 0 || n_val >= frames.len() {
        (order.clone(), order.clone())
    } else {
        let (v, t) = order.split_at(n_val);
        (v.to_vec(), t.to_vec())
    };
    let val: Vec<LabeledImage> = val_idx.iter().map(|&i| LabeledImage::from_frame(&frames[i])).collect();
    let plain: Vec<LabeledImage> = frames.iter().map(LabeledImage::from_frame).collect();
    let mut encoder = VisionEncoder::new(rng);
    let mut adam = Adam::new(&encoder.param_shapes(), AdamConfig::with_lr(config.learning_rate));
    let initial = mean_loss(&encoder, &val)?;
    let mut best = (encoder.clone(), 0u32, initial);
    let mut history = Vec::new();
    let started = Instant::now();
    for epoch in 1..=config.epochs {
        train.shuffle(rng);
        let mut epoch_loss = 0.0;
        for batch in train.chunks(config.batch_size) {
            let mut grads = encoder.zero_grads();
            for &i in batch {
                epoch_loss += if config.noise_augment > 0.0 && rng.random::<f64>() < config.noise_augment {
                    let f = frames[i].with_background_noise(config.background, config.noise_std, rng);
                    encoder.loss_and_grad(&f.pooled(), &plain[i].labels, &mut grads)?
                } else {
                    encoder.loss_and_grad(&plain[i].pooled, &plain[i].labels, &mut grads)?
                };
            }
            let mut grads = grads.into_grads();
            grads.scale(1.0 / batch.len() as f64);
            adam.step(encoder.param_blocks_mut(), &grads)?;
        }
        let validation_loss = mean_loss(&encoder, &val)?;
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            validation_loss,
        });
        if validation_loss < best.2 {
            best = (encoder.clone(), epoch, validation_loss);
        }
        if config.time_budget.is_some_and(|b| started.elapsed().as_secs_f64() >= b) {
            break;
        }
    }
    let report = PretrainReport {
        initial_validation_loss: initial,
        history,
        best_epoch: best.1,
        best_validation_loss: best.2,
        train_size: train.len(),
        validation_size: val.len(),
    };
    Ok((best.0, report))
}

/// The six most recent embeddings, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistory {
    buf: VecDeque<Vec<f64>>,
}

impl FeatureHistory {
    /// History with every slot holding `first`.
    pub fn filled(first: &[f64]) -> Self {
        assert_eq!(first.len(), FEATURE_DIM, "feature width");
        Self {
            buf: std::iter::repeat_n(first.to_vec(), HISTORY_LEN).collect(),
        }
    }

    pub fn push(&mut self, f: &[f64]) {
        assert_eq!(f.len(), FEATURE_DIM, "feature width");
        self.buf.pop_back();
        self.buf.push_front(f.to_vec());
    }

    pub fn newest(&self) -> &[f64] {
        &self.buf[0]
    }

    pub fn get(&self, age: usize) -> &[f64] {
        &self.buf[age]
    }

    /// `[f_t, f_{t-1}, …, f_{t-5}]` flattened.
    pub fn flatten(&self) -> Vec<f64> {
        self.buf.iter().flatten().copied().collect()
    }
}
