//! Rollout buffer and collection across a batch of environments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::demos::{HumanPolicy, PlannerConfig, ScriptedThrower};
use crate::env::{Env, Perception};
use crate::error::Result;
use crate::mappo::team::{Agent, Role};
use crate::seeding::Rng;
use crate::sim::observation::{human_input, Observations, GLOBAL_DIM};
use crate::sim::reward::RewardTerms;
use crate::sim::world::{FailureCause, World, ACTION_DIM};

/// Action used when the scripted thrower has no feasible plan: hold still
/// with the gripper closed.
pub const HOLD_ACTION: [f64; 4] = [0.0, 0.0, 0.0, -1.0];

/// Per-agent slice of a rollout. Index `env * length + t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentTrajectory {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    /// `V(s_T)` per environment for the state after the last step.
    pub bootstrap: Vec<f64>,
    pub gae: Vec<f64>,
    pub internal: Vec<f64>,
    pub hybrid: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Episode outcomes observed while collecting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTally {
    pub episodes: u32,
    pub hits: u32,
    pub successes: u32,
    pub numeric_faults: u32,
    pub causes: BTreeMap<String, u32>,
    pub return_sum: f64,
}

impl EpisodeTally {
    pub fn hit_rate(&self) -> Option<f64> {
        (self.episodes > 0).then(|| self.hits as f64 / self.episodes as f64)
    }

    pub fn success_rate(&self) -> Option<f64> {
        (self.episodes > 0).then(|| self.successes as f64 / self.episodes as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub length: usize,
    pub global: Vec<f64>,
    /// Shared reward of every transition.
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub terms: Vec<RewardTerms>,
    /// Frozen human mean `μ*(o*)` per transition, when a reference exists.
    pub human_mean: Vec<f64>,
    pub agents: Vec<AgentTrajectory>,
    pub tally: EpisodeTally,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.n_envs * self.length
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn global_state(&self, i: usize) -> &[f64] {
        &self.global[i * GLOBAL_DIM..(i + 1) * GLOBAL_DIM]
    }

    pub fn mean_terms(&self) -> RewardTerms {
        let mut sum = RewardTerms::default();
        for t in &self.terms {
            sum.add_assign(t);
        }
        sum.scaled(1.0 / self.terms.len().max(1) as f64)
    }
}

/// The environments of one trainer with their current observations.
pub struct EnvBatch {
    pub envs: Vec<Env>,
    pub obs: Vec<Observations>,
    scripted: Vec<Option<ScriptedThrower>>,
    returns: Vec<f64>,
}

impl EnvBatch {
    pub fn new(world: &World, perception: &Perception, n_envs: usize, seed: u64, scripted_thrower: bool) -> Result<Self> {
        let mut envs = Vec::with_capacity(n_envs);
        for k in 0..n_envs {
            envs.push(Env::new(world, perception, seed, k as u64)?);
        }
        let obs = envs.iter().map(Env::observe).collect();
        let scripted = (0..n_envs)
            .map(|_| scripted_thrower.then(|| ScriptedThrower::new(world, PlannerConfig::default())))
            .collect();
        Ok(Self {
            envs,
            obs,
            scripted,
            returns: vec![0.0; n_envs],
        })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }
}

/// Steps every environment `length` times in fixed order. Each learned
/// agent samples from its own stream in `sampling`; finished episodes
/// reset in place.
pub fn collect_rollouts(
    world: &World,
    perception: &Perception,
    batch: &mut EnvBatch,
    agents: &[Agent],
    human: Option<&HumanPolicy>,
    length: usize,
    sampling: &mut [Rng],
) -> Result<RolloutBuffer> {
    let n_envs = batch.len();
    let n = n_envs * length;
    let mut buf = RolloutBuffer {
        n_envs,
        length,
        global: vec![0.0; n * GLOBAL_DIM],
        rewards: vec![0.0; n],
        dones: vec![false; n],
        terms: vec![RewardTerms::default(); n],
        human_mean: Vec::new(),
        agents: agents
            .iter()
            .map(|a| AgentTrajectory {
                obs: vec![0.0; n * a.role.obs_dim()],
                actions: vec![0.0; n * a.role.action_dim()],
                log_probs: vec![0.0; n],
                values: vec![0.0; n],
                bootstrap: vec![0.0; n_envs],
                ..Default::default()
            })
            .collect(),
        tally: EpisodeTally::default(),
    };
    for t in 0..length {
        for e in 0..n_envs {
            let i = e * length + t;
            let obs = &batch.obs[e];
            buf.global[i * GLOBAL_DIM..(i + 1) * GLOBAL_DIM].copy_from_slice(&obs.global);
            let mut throw = None;
            let mut catch = None;
            for (k, agent) in agents.iter().enumerate() {
                let o = agent.role.observe(obs);
                let (a, lp) = agent.actor.sample(&o, &mut sampling[k])?;
                let v = agent.critic.forward(&obs.global)?[0];
                let tr = &mut buf.agents[k];
                let (od, ad) = (agent.role.obs_dim(), agent.role.action_dim());
                tr.obs[i * od..(i + 1) * od].copy_from_slice(&o);
                tr.actions[i * ad..(i + 1) * ad].copy_from_slice(&a);
                tr.log_probs[i] = lp;
                tr.values[i] = v;
                match agent.role {
                    Role::Thrower => throw = Some(a),
                    Role::Catcher => catch = Some(a),
                    Role::Joint => {
                        throw = Some(a[..ACTION_DIM].to_vec());
                        catch = Some(a[ACTION_DIM..].to_vec());
                    }
                }
            }
            let env = &mut batch.envs[e];
            let throw = match (throw, &mut batch.scripted[e]) {
                (Some(a), _) => a,
                (None, Some(s)) => s.act(world, &env.state).map(|a| a.to_vec()).unwrap_or(HOLD_ACTION.to_vec()),
                (None, None) => HOLD_ACTION.to_vec(),
            };
            let catch = catch.unwrap_or(HOLD_ACTION.to_vec());
            let (outcome, next) = env.step(world, perception, &throw, &catch)?;
            buf.rewards[i] = outcome.reward;
            buf.terms[i] = outcome.terms;
            buf.dones[i] = outcome.terminated;
            batch.returns[e] += outcome.reward;
            batch.obs[e] = if outcome.terminated {
                let tally = &mut buf.tally;
                tally.episodes += 1;
                tally.hits += env.state.hit as u32;
                tally.successes += outcome.success as u32;
                tally.numeric_faults += (outcome.cause == FailureCause::NumericFault) as u32;
                *tally.causes.entry(outcome.cause.name().to_string()).or_default() += 1;
                tally.return_sum += batch.returns[e];
                batch.returns[e] = 0.0;
                env.reset(world, perception)?
            } else {
                next
            };
        }
    }
    for (k, agent) in agents.iter().enumerate() {
        for e in 0..n_envs {
            buf.agents[k].bootstrap[e] = agent.critic.forward(&batch.obs[e].global)?[0];
        }
    }
    if let Some(h) = human {
        buf.human_mean = Vec::with_capacity(n * ACTION_DIM);
        for i in 0..n {
            buf.human_mean.extend(h.mean_action(&human_input(buf.global_state(i)))?);
        }
    }
    Ok(buf)
}
