//! Behavior-cloned thrower used as the fixed KL reference.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::demos::dataset::DemoRecord;
use crate::error::{check_dim, Error, Result};
use crate::nn::checkpoint::Bundle;
use crate::nn::{Activation, AdamConfig, Grads};
use crate::seeding::Rng;
use crate::sim::observation::HUMAN_INPUT_DIM;
use crate::sim::world::ACTION_DIM;
use crate::{Adam, Network};

/// Deterministic mean network with a constant reference spread `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanPolicy {
    pub mean: Network,
    pub sigma: f64,
}

impl HumanPolicy {
    pub fn new(hidden: usize, sigma: f64, rng: &mut Rng) -> Result<Self> {
        let mean = Network::mlp(&[HUMAN_INPUT_DIM, hidden, hidden, ACTION_DIM], Activation::Elu, Activation::Linear, 1.0, rng)?;
        Ok(Self { mean, sigma })
    }

    pub fn mean_action(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.mean.forward(input)
    }

    pub fn log_std(&self) -> [f64; ACTION_DIM] {
        [self.sigma.ln(); ACTION_DIM]
    }

    pub fn to_bundle(&self, bundle: &mut Bundle) {
        bundle.put_network("human.mean", &self.mean);
        bundle.put_vector("human.sigma", &[self.sigma]);
    }

    pub fn from_bundle(bundle: &Bundle) -> Result<Self> {
        let mean: Network = bundle.network("human.mean")?;
        check_dim("human policy input", HUMAN_INPUT_DIM, mean.input_dim())?;
        check_dim("human policy output", ACTION_DIM, mean.output_dim())?;
        let sigma = bundle.vector::<f64>("human.sigma")?;
        match sigma.as_slice() {
            [s] if *s > 0.0 => Ok(Self { mean, sigma: *s }),
            _ => Err(Error::format("checkpoint", "human.sigma must hold one positive value")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Reference standard deviation of the cloned policy, action units.
    pub sigma: f64,
    /// Training MSE is recorded every this many epochs.
    pub log_every: u32,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 10_000,
            batch_size: 64,
            learning_rate: 1e-4,
            hidden: 128,
            sigma: 0.1,
            log_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcReport {
    pub samples: usize,
    pub epochs: u32,
    /// `(epoch, training MSE)` pairs.
    pub history: Vec<(u32, f64)>,
    pub final_mse: f64,
}

/// One supervised pair `(o*, a_throw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcSample {
    pub input: [f64; HUMAN_INPUT_DIM],
    pub action: [f64; ACTION_DIM],
}

impl From<&DemoRecord> for BcSample {
    fn from(r: &DemoRecord) -> Self {
        Self {
            input: r.human_input(),
            action: r.action,
        }
    }
}

/// Mean over samples and action dimensions of the squared error.
pub fn action_mse(policy: &HumanPolicy, data: &[BcSample]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in data {
        let m = policy.mean_action(&s.input)?;
        total += m.iter().zip(&s.action).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(total / (data.len() * ACTION_DIM) as f64)
}

/// Minibatch action MSE (same normalization as [`action_mse`]) and its
/// gradient with respect to the mean network.
pub fn bc_loss_and_grad(policy: &HumanPolicy, batch: &[&BcSample]) -> Result<(f64, Grads<f64>)> {
    let mut grads = policy.mean.zero_grads();
    let n = batch.len() as f64;
    let norm = 2.0 / (ACTION_DIM as f64 * n);
    let mut loss = 0.0;
    for s in batch {
        let trace = policy.mean.forward_recorded(&s.input)?;
        let up: Vec<f64> = trace.output().iter().zip(&s.action).map(|(a, b)| norm * (a - b)).collect();
        loss += trace.output().iter().zip(&s.action).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        policy.mean.backward_into(&trace, &up, &mut grads)?;
    }
    Ok((loss / (n * ACTION_DIM as f64), grads))
}

/// Behavior cloning by minibatch Adam on the action MSE. Batches come from a
/// per-epoch shuffle drawn from `rng`.
pub fn train_human_policy(data: &[BcSample], config: &BcConfig, rng: &mut Rng) -> Result<(HumanPolicy, BcReport)> {
    if data.is_empty() {
        return Err(Error::contract("behavior cloning needs at least one record"));
    }
    if config.batch_size == 0 || !(config.sigma > 0.0) {
        return Err(Error::config("batch_size and sigma must be positive"));
    }
    let mut policy = HumanPolicy::new(config.hidden, config.sigma, rng)?;
    let mut adam = Adam::new(&policy.mean.param_shapes(), AdamConfig::with_lr(config.learning_rate));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();
    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        for batch in order.chunks(config.batch_size) {
            let samples: Vec<&BcSample> = batch.iter().map(|&i| &data[i]).collect();
            let (_, grads) = bc_loss_and_grad(&policy, &samples)?;
            adam.step(policy.mean.param_blocks_mut(), &grads)?;
        }
        if epoch % config.log_every.max(1) == 0 || epoch == config.epochs {
            history.push((epoch, action_mse(&policy, data)?));
        }
    }
    let final_mse = action_mse(&policy, data)?;
    let report = BcReport {
        samples: data.len(),
        epochs: config.epochs,
        history,
        final_mse,
    };
    Ok((policy, report))
}
