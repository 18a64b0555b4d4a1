//! Trainer configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ablation arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    None,
    /// No learning: both arms replay demonstrator actions planned on a
    /// noise-free twin of the episode.
    OpenLoop,
    /// One agent over the concatenated observations and actions.
    NoMarl,
    NoHumanReg,
    NoHybrid,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::None,
        Ablation::OpenLoop,
        Ablation::NoMarl,
        Ablation::NoHumanReg,
        Ablation::NoHybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::OpenLoop => "open-loop",
            Ablation::NoMarl => "no-marl",
            Ablation::NoHumanReg => "no-human-reg",
            Ablation::NoHybrid => "no-hybrid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown ablation {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub learning_rate: f64,
    /// PPO epochs per iteration (K).
    pub epochs: u32,
    /// Minibatch size (B).
    pub minibatch_size: usize,
    /// Hidden widths shared by actors and critics.
    pub hidden: Vec<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_reg: f64,
    /// Training iterations (L_max).
    pub iterations: u32,
    /// Control steps collected per environment per iteration (T_max).
    pub rollout_length: usize,
    pub n_envs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    /// Initial weight scale of each actor's output layer.
    pub actor_output_gain: f64,
    pub seed: u64,
    /// Write a checkpoint every this many iterations (0: only at the end).
    pub checkpoint_every: u32,
    /// Drive the thrower with the scripted demonstrator and train only the catcher.
    pub scripted_thrower: bool,
    pub ablation: Ablation,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.995,
            gae_lambda: 0.95,
            clip: 0.2,
            learning_rate: 1e-4,
            epochs: 8,
            minibatch_size: 4096,
            hidden: vec![512, 512, 512],
            beta1: 0.01,
            beta2: 0.001,
            lambda_reg: 0.2,
            iterations: 1000,
            rollout_length: 180,
            n_envs: 64,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 1.0,
            init_log_std: -1.0,
            actor_output_gain: 0.01,
            seed: 0,
            checkpoint_every: 50,
            scripted_thrower: false,
            ablation: Ablation::None,
        }
    }
}

impl TrainerConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("gae_lambda", self.gae_lambda)?;
        if !(0.0..=1.0).contains(&self.lambda_reg) {
            return Err(Error::contract(format!("lambda_reg must lie in [0, 1], got {}", self.lambda_reg)));
        }
        if self.beta1 < 0.0 || self.beta2 < 0.0 {
            return Err(Error::config("advantage weights must be non-negative"));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.rollout_length == 0 || self.n_envs == 0 {
            return Err(Error::config("epochs, minibatch_size, rollout_length and n_envs must be positive"));
        }
        if !(self.clip > 0.0 && self.learning_rate > 0.0 && self.max_grad_norm > 0.0) {
            return Err(Error::config("clip, learning_rate and max_grad_norm must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be non-empty and positive"));
        }
        Ok(())
    }

    /// Weights after applying the ablation: `(β₁, β₂, λ_reg)`.
    pub fn effective_weights(&self) -> (f64, f64, f64) {
        match self.ablation {
            Ablation::NoHybrid => (0.0, 0.0, self.lambda_reg),
            Ablation::NoHumanReg => (self.beta1, self.beta2, 0.0),
            _ => (self.beta1, self.beta2, self.lambda_reg),
        }
    }
}
