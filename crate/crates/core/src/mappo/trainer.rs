//! The human-regularized MAPPO training loop.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::demos::HumanPolicy;
use crate::env::Perception;
use crate::error::{Error, Result};
use crate::mappo::advantage::{compute_gae, hybrid_advantage, internal_advantages, normalize};
use crate::mappo::config::{Ablation, TrainerConfig};
use crate::mappo::ppo::{ppo_update, ActorSample, PpoCoefficients, UpdateStats};
use crate::mappo::rollout::{collect_rollouts, EnvBatch, EpisodeTally, RolloutBuffer};
use crate::mappo::team::{Agent, Role};
use crate::nn::checkpoint::Bundle;
use crate::seeding::{rng_for, stream, Rng};
use crate::sim::reward::RewardTerms;
use crate::sim::world::{World, ACTION_DIM};
use crate::sim::WorldConfig;
use crate::vision::VisionEncoder;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub role: String,
    pub objective: f64,
    pub surrogate: f64,
    pub kl: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
    pub actor_grad_norm: f64,
    pub skipped_updates: u32,
    pub updates: u32,
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u32,
    pub wall_time: f64,
    pub samples: usize,
    pub episodes: u32,
    pub hit_rate: Option<f64>,
    pub success_rate: Option<f64>,
    pub mean_episode_return: Option<f64>,
    pub reward_mean: f64,
    pub terms: RewardTerms,
    pub kl_mean: f64,
    pub numeric_faults: u32,
    pub agents: Vec<AgentMetrics>,
    pub tally: EpisodeTally,
}

/// Per-agent advantage processing; returns the hybrid advantages (already
/// normalized) and returns for the buffer.
pub fn process_advantages(
    buf: &mut RolloutBuffer,
    agent: usize,
    gamma: f64,
    lambda: f64,
    beta1: f64,
    beta2: f64,
    noise: &mut Rng,
) -> Result<()> {
    let (n_envs, len) = (buf.n_envs, buf.length);
    let tr = &mut buf.agents[agent];
    tr.gae = Vec::with_capacity(n_envs * len);
    tr.returns = Vec::with_capacity(n_envs * len);
    tr.internal = Vec::with_capacity(n_envs * len);
    for e in 0..n_envs {
        let r = e * len..(e + 1) * len;
        let (adv, ret) = compute_gae(&buf.rewards[r.clone()], &tr.values[r.clone()], &buf.dones[r.clone()], tr.bootstrap[e], gamma, lambda)?;
        tr.gae.extend(adv);
        tr.returns.extend(ret);
        tr.internal.extend(internal_advantages(&tr.values[r.clone()], &buf.dones[r], tr.bootstrap[e]));
    }
    let mut hybrid = hybrid_advantage(&tr.gae, &tr.internal, beta1, beta2, noise)?;
    normalize(&mut hybrid);
    tr.hybrid = hybrid;
    Ok(())
}

/// K epochs of shuffled minibatch updates for one agent.
#[allow(clippy::too_many_arguments)]
pub fn update_agent(
    agent: &mut Agent,
    buf: &RolloutBuffer,
    k: usize,
    config: &TrainerConfig,
    lambda_reg: f64,
    reference_sigma: f64,
    shuffle: &mut Rng,
) -> Result<AgentMetrics> {
    let tr = &buf.agents[k];
    let (od, ad) = (agent.role.obs_dim(), agent.role.action_dim());
    let use_reference = agent.role.controls_thrower() && !buf.human_mean.is_empty() && lambda_reg > 0.0;
    let coef = PpoCoefficients {
        clip: config.clip,
        value_coef: config.value_coef,
        entropy_coef: config.entropy_coef,
        lambda_reg: if use_reference { lambda_reg } else { 0.0 },
        max_grad_norm: config.max_grad_norm,
    };
    let mut metrics = AgentMetrics {
        role: agent.role.name().to_string(),
        ..Default::default()
    };
    let mut sum = UpdateStats::default();
    let mut order: Vec<usize> = (0..buf.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(shuffle);
        for mb in order.chunks(config.minibatch_size) {
            let samples: Vec<ActorSample> = mb
                .iter()
                .map(|&i| ActorSample {
                    obs: &tr.obs[i * od..(i + 1) * od],
                    action: &tr.actions[i * ad..(i + 1) * ad],
                    logp_old: tr.log_probs[i],
                    advantage: tr.hybrid[i],
                    reference: use_reference.then(|| &buf.human_mean[i * ACTION_DIM..(i + 1) * ACTION_DIM]),
                })
                .collect();
            let states: Vec<&[f64]> = mb.iter().map(|&i| buf.global_state(i)).collect();
            let returns: Vec<f64> = mb.iter().map(|&i| tr.returns[i]).collect();
            let s = ppo_update(
                &mut agent.actor,
                &mut agent.critic,
                &mut agent.actor_opt,
                &mut agent.critic_opt,
                &samples,
                &states,
                &returns,
                &coef,
                reference_sigma,
            )?;
            metrics.updates += 1;
            if s.skipped {
                metrics.skipped_updates += 1;
                continue;
            }
            sum.actor.objective += s.actor.objective;
            sum.actor.surrogate += s.actor.surrogate;
            sum.actor.kl += s.actor.kl;
            sum.actor.entropy += s.actor.entropy;
            sum.actor.clip_fraction += s.actor.clip_fraction;
            sum.actor.mean_ratio += s.actor.mean_ratio;
            sum.value_loss += s.value_loss;
            sum.actor_grad_norm += s.actor_grad_norm;
        }
    }
    let m = (metrics.updates - metrics.skipped_updates).max(1) as f64;
    metrics.objective = sum.actor.objective / m;
    metrics.surrogate = sum.actor.surrogate / m;
    metrics.kl = sum.actor.kl / m;
    metrics.entropy = sum.actor.entropy / m;
    metrics.clip_fraction = sum.actor.clip_fraction / m;
    metrics.mean_ratio = sum.actor.mean_ratio / m;
    metrics.value_loss = sum.value_loss / m;
    metrics.actor_grad_norm = sum.actor_grad_norm / m;
    Ok(metrics)
}

pub struct Trainer {
    pub config: TrainerConfig,
    pub world: World,
    pub perception: Perception,
    pub human: Option<HumanPolicy>,
    pub agents: Vec<Agent>,
    pub batch: EnvBatch,
    sampling: Vec<Rng>,
    noise: Vec<Rng>,
    shuffle: Vec<Rng>,
    pub iteration: u32,
}

impl Trainer {
    /// Agents are initialized from the `INIT` stream; every agent `k` draws
    /// actions, advantage noise and minibatch order from its own streams.
    pub fn new(
        config: TrainerConfig,
        world_config: WorldConfig,
        encoder: Option<VisionEncoder>,
        human: Option<HumanPolicy>,
    ) -> Result<Self> {
        config.validate()?;
        if config.ablation == Ablation::OpenLoop {
            return Err(Error::contract("the open-loop arm has nothing to train; evaluate it directly"));
        }
        let Some(encoder) = encoder else {
            return Err(Error::contract("training needs a pretrained encoder"));
        };
        let roles: Vec<Role> = match (config.ablation, config.scripted_thrower) {
            (_, true) => vec![Role::Catcher],
            (Ablation::NoMarl, false) => vec![Role::Joint],
            _ => vec![Role::Thrower, Role::Catcher],
        };
        let (_, _, lambda_reg) = config.effective_weights();
        let regularized = roles.iter().any(|r| r.controls_thrower()) && lambda_reg > 0.0;
        if regularized && human.is_none() {
            return Err(Error::contract("lambda_reg > 0 needs a pretrained human policy"));
        }
        let world = World::new(world_config)?;
        let perception = Perception::new(Some(encoder));
        let seed = config.seed;
        let mut agents = Vec::new();
        for (k, &role) in roles.iter().enumerate() {
            let mut init = rng_for(seed, &[stream::INIT, k as u64]);
            agents.push(Agent::new(role, &config.hidden, config.init_log_std, config.actor_output_gain, config.learning_rate, &mut init)?);
        }
        let batch = EnvBatch::new(&world, &perception, config.n_envs, seed, config.scripted_thrower)?;
        let streams = |s: u64| (0..agents.len()).map(|k| rng_for(seed, &[s, k as u64])).collect::<Vec<_>>();
        Ok(Self {
            sampling: streams(stream::POLICY_SAMPLING),
            noise: streams(stream::ADVANTAGE_NOISE),
            shuffle: streams(stream::SHUFFLE),
            human: if regularized { human } else { None },
            config,
            world,
            perception,
            agents,
            batch,
            iteration: 0,
        })
    }

    /// Collect, estimate advantages, update every agent.
    pub fn iterate(&mut self) -> Result<IterationMetrics> {
        let started = Instant::now();
        let c = self.config.clone();
        let (beta1, beta2, lambda_reg) = c.effective_weights();
        let mut buf = collect_rollouts(
            &self.world,
            &self.perception,
            &mut self.batch,
            &self.agents,
            self.human.as_ref(),
            c.rollout_length,
            &mut self.sampling,
        )?;
        for k in 0..self.agents.len() {
            process_advantages(&mut buf, k, c.gamma, c.gae_lambda, beta1, beta2, &mut self.noise[k])?;
        }
        let sigma = self.human.as_ref().map_or(1.0, |h| h.sigma);
        let mut agents = Vec::new();
        for k in 0..self.agents.len() {
            agents.push(update_agent(&mut self.agents[k], &buf, k, &c, lambda_reg, sigma, &mut self.shuffle[k])?);
        }
        self.iteration += 1;
        let tally = buf.tally.clone();
        let kl_mean = agents.iter().filter(|a| a.kl != 0.0).map(|a| a.kl).next().unwrap_or(0.0);
        Ok(IterationMetrics {
            iteration: self.iteration,
            wall_time: started.elapsed().as_secs_f64(),
            samples: buf.len(),
            episodes: tally.episodes,
            hit_rate: tally.hit_rate(),
            success_rate: tally.success_rate(),
            mean_episode_return: (tally.episodes > 0).then(|| tally.return_sum / tally.episodes as f64),
            reward_mean: buf.rewards.iter().sum::<f64>() / buf.len() as f64,
            terms: buf.mean_terms(),
            kl_mean,
            numeric_faults: tally.numeric_faults,
            agents,
            tally,
        })
    }

    /// Self-contained checkpoint: agents, encoder, human policy, both configs.
    pub fn checkpoint(&self) -> Result<Bundle> {
        let mut b = Bundle::new();
        for a in &self.agents {
            a.to_bundle(&mut b);
        }
        if let Some(enc) = &self.perception.encoder {
            enc.to_bundle(&mut b);
        }
        if let Some(h) = &self.human {
            h.to_bundle(&mut b);
        }
        b.put_text("trainer.config", &toml::to_string(&self.config).map_err(|e| Error::config(e.to_string()))?);
        b.put_text("world.config", &toml::to_string(&self.world.config).map_err(|e| Error::config(e.to_string()))?);
        b.put_text("trainer.iteration", &self.iteration.to_string());
        Ok(b)
    }
}

/// Runs `config.iterations` iterations, appending one JSON line per
/// iteration to `out/metrics.jsonl` and writing `out/checkpoint.bin`
/// periodically and at the end. `on_iteration` sees every record.
pub fn train(
    config: TrainerConfig,
    world_config: WorldConfig,
    encoder: Option<VisionEncoder>,
    human: Option<HumanPolicy>,
    out: &Path,
    mut on_iteration: impl FnMut(&IterationMetrics),
) -> Result<(Trainer, PathBuf)> {
    std::fs::create_dir_all(out)?;
    let mut trainer = Trainer::new(config, world_config, encoder, human)?;
    let metrics_path = out.join("metrics.jsonl");
    let mut log = std::io::BufWriter::new(std::fs::File::create(&metrics_path)?);
    let ckpt = out.join("checkpoint.bin");
    for _ in 0..trainer.config.iterations {
        let m = trainer.iterate()?;
        serde_json::to_writer(&mut log, &m).map_err(std::io::Error::from)?;
        log.write_all(b"\n")?;
        log.flush()?;
        on_iteration(&m);
        let every = trainer.config.checkpoint_every;
        if every > 0 && m.iteration % every == 0 {
            trainer.checkpoint()?.save(&ckpt)?;
        }
    }
    trainer.checkpoint()?.save(&ckpt)?;
    Ok((trainer, ckpt))
}

