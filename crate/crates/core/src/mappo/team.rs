//! Agent roles, learned agents, and per-episode action sources.

use rand::Rng as _;

use crate::demos::{InterceptingCatcher, PlannerConfig, ScriptedThrower};
use crate::error::{Error, Result};
use crate::nn::checkpoint::Bundle;
use crate::nn::{Activation, AdamConfig};
use crate::seeding::Rng;
use crate::sim::observation::{Observations, CATCH_OBS_DIM, GLOBAL_DIM, THROW_OBS_DIM};
use crate::sim::world::{EpisodeParams, World, WorldState, ACTION_DIM};
use crate::{Adam, Network, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Thrower,
    Catcher,
    /// Single agent acting for both arms.
    Joint,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Thrower => "thrower",
            Role::Catcher => "catcher",
            Role::Joint => "joint",
        }
    }

    pub fn obs_dim(self) -> usize {
        match self {
            Role::Thrower => THROW_OBS_DIM,
            Role::Catcher => CATCH_OBS_DIM,
            Role::Joint => THROW_OBS_DIM + CATCH_OBS_DIM,
        }
    }

    pub fn action_dim(self) -> usize {
        match self {
            Role::Joint => 2 * ACTION_DIM,
            _ => ACTION_DIM,
        }
    }

    pub fn observe(self, obs: &Observations) -> Vec<f64> {
        match self {
            Role::Thrower => obs.throw.clone(),
            Role::Catcher => obs.catch.clone(),
            Role::Joint => [obs.throw.as_slice(), obs.catch.as_slice()].concat(),
        }
    }

    /// Whether the first four action dimensions drive the thrower and are
    /// therefore regularized toward the human policy.
    pub fn controls_thrower(self) -> bool {
        matches!(self, Role::Thrower | Role::Joint)
    }
}

/// Actor, critic over the global state, and their optimizers.
#[derive(Debug, Clone)]
pub struct Agent {
    pub role: Role,
    pub actor: Policy,
    pub critic: Network,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl Agent {
    pub fn new(role: Role, hidden: &[usize], init_log_std: f64, output_gain: f64, lr: f64, rng: &mut Rng) -> Result<Self> {
        let mut sizes = vec![role.obs_dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(role.action_dim());
        let mean = Network::mlp(&sizes, Activation::Elu, Activation::Linear, output_gain, rng)?;
        let actor = Policy::new(mean, vec![init_log_std; role.action_dim()])?;
        sizes[0] = GLOBAL_DIM;
        *sizes.last_mut().expect("non-empty") = 1;
        let critic = Network::mlp(&sizes, Activation::Elu, Activation::Linear, 1.0, rng)?;
        let actor_opt = Adam::new(&actor.param_shapes(), AdamConfig::with_lr(lr));
        let critic_opt = Adam::new(&critic.param_shapes(), AdamConfig::with_lr(lr));
        Ok(Self {
            role,
            actor,
            critic,
            actor_opt,
            critic_opt,
        })
    }

    pub fn to_bundle(&self, bundle: &mut Bundle) {
        let p = self.role.name();
        bundle.put_network(&format!("{p}.actor.mean"), &self.actor.mean);
        bundle.put_vector(&format!("{p}.actor.log_std"), self.actor.log_std());
        bundle.put_network(&format!("{p}.critic"), &self.critic);
    }
}

/// Loads the actor stored for `role`, if the bundle has one.
pub fn actor_from_bundle(bundle: &Bundle, role: Role) -> Result<Option<Policy>> {
    let p = role.name();
    let key = format!("{p}.actor.mean");
    if !bundle.names().any(|n| n == key) {
        return Ok(None);
    }
    let mean: Network = bundle.network(&key)?;
    let log_std = bundle.vector::<f64>(&format!("{p}.actor.log_std"))?;
    if mean.input_dim() != role.obs_dim() || mean.output_dim() != role.action_dim() {
        return Err(Error::Dimension {
            context: "checkpoint actor",
            expected: role.obs_dim(),
            got: mean.input_dim(),
        });
    }
    Ok(Some(Policy::new(mean, log_std)?))
}

/// Where one arm's actions come from during an episode.
#[derive(Debug, Clone)]
pub enum Controller {
    Learned(Policy),
    /// Thrower only: the analytic demonstrator.
    Scripted,
    /// Catcher only: palm servoed to the interception point.
    Intercepting,
    /// Uniform actions in [−1, 1].
    Random,
    /// Replay of demonstrator actions planned on a noise-free twin.
    OpenLoop,
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Learned(_) => "learned",
            Controller::Scripted => "scripted",
            Controller::Intercepting => "intercepting",
            Controller::Random => "random",
            Controller::OpenLoop => "open-loop",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Team {
    Pair { thrower: Controller, catcher: Controller },
    Joint(Policy),
}

/// Per-episode action generator for a [`Team`].
pub struct EpisodeDriver<'a> {
    team: &'a Team,
    scripted: Option<ScriptedThrower>,
    intercepting: InterceptingCatcher,
    replay: Option<(Vec<[f64; 4]>, Vec<[f64; 4]>)>,
}

fn mean_or_sample(policy: &Policy, obs: &[f64], deterministic: bool, rng: &mut Rng) -> Result<Vec<f64>> {
    if deterministic {
        policy.mean_action(obs)
    } else {
        Ok(policy.sample(obs, rng)?.0)
    }
}

impl<'a> EpisodeDriver<'a> {
    pub fn new(world: &World, team: &'a Team) -> Self {
        let needs_script = matches!(
            team,
            Team::Pair {
                thrower: Controller::Scripted | Controller::OpenLoop,
                ..
            } | Team::Pair {
                catcher: Controller::OpenLoop,
                ..
            }
        );
        Self {
            team,
            scripted: needs_script.then(|| ScriptedThrower::new(world, PlannerConfig::default())),
            intercepting: InterceptingCatcher::default(),
            replay: None,
        }
    }

    /// Call at the start of every episode.
    pub fn begin(&mut self, world: &World, state: &WorldState) -> Result<()> {
        self.replay = None;
        let open_loop = matches!(
            self.team,
            Team::Pair {
                thrower: Controller::OpenLoop,
                ..
            } | Team::Pair {
                catcher: Controller::OpenLoop,
                ..
            }
        );
        if open_loop {
            self.replay = Some(self.plan_open_loop(world, state)?);
        }
        Ok(())
    }

    /// Closed-loop demonstrator run on a copy of the episode with nominal
    /// dynamics, nominal start pose and no sensor or actuator noise.
    fn plan_open_loop(&mut self, world: &World, state: &WorldState) -> Result<(Vec<[f64; 4]>, Vec<[f64; 4]>)> {
        let mut cfg = world.config.clone();
        let r = &mut cfg.randomization;
        r.obs_noise_std = 0.0;
        r.action_noise_std = 0.0;
        let twin_world = World {
            config: cfg,
            objects: world.objects.clone(),
        };
        let mut twin = state.clone();
        twin.params = EpisodeParams {
            stiffness_scale: [1.0; 2],
            damping_scale: [1.0; 2],
            restitution_offset: 0.0,
            friction_offset: 0.0,
            obs_bias: [0.0; 16],
            action_bias: [0.0; 8],
            background_noise: false,
        };
        for (arm, c) in [world.config.thrower.nominal, world.config.catcher.nominal].iter().enumerate() {
            twin.arms[arm].q[..3].copy_from_slice(c);
            twin.reading.q[arm][..3].copy_from_slice(c);
        }
        let scripted = self.scripted.as_mut().expect("open loop keeps a demonstrator");
        let (mut throws, mut catches) = (Vec::new(), Vec::new());
        while !twin.terminated {
            let a = scripted.act(&twin_world, &twin)?;
            let b = self.intercepting.act(&twin_world, &twin);
            throws.push(a);
            catches.push(b);
            twin_world.step(&mut twin, &a, &b)?;
        }
        Ok((throws, catches))
    }

    /// Actions for both arms at the current tick.
    pub fn act(
        &mut self,
        world: &World,
        state: &WorldState,
        obs: &Observations,
        deterministic: bool,
        rng: &mut Rng,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let random = |rng: &mut Rng| (0..ACTION_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>();
        let replayed = |seq: &Vec<[f64; 4]>| seq.get(state.tick as usize).copied().unwrap_or([0.0, 0.0, 0.0, -1.0]).to_vec();
        match self.team {
            Team::Joint(policy) => {
                let a = mean_or_sample(policy, &Role::Joint.observe(obs), deterministic, rng)?;
                Ok((a[..ACTION_DIM].to_vec(), a[ACTION_DIM..].to_vec()))
            }
            Team::Pair { thrower, catcher } => {
                let a = match thrower {
                    Controller::Learned(p) => mean_or_sample(p, &obs.throw, deterministic, rng)?,
                    Controller::Scripted => self.scripted.as_mut().expect("scripted thrower").act(world, state)?.to_vec(),
                    Controller::Random => random(rng),
                    Controller::OpenLoop => replayed(&self.replay.as_ref().expect("begin() called").0),
                    Controller::Intercepting => return Err(Error::contract("the intercepting controller drives the catcher only")),
                };
                let b = match catcher {
                    Controller::Learned(p) => mean_or_sample(p, &obs.catch, deterministic, rng)?,
                    Controller::Intercepting => self.intercepting.act(world, state).to_vec(),
                    Controller::Random => random(rng),
                    Controller::OpenLoop => replayed(&self.replay.as_ref().expect("begin() called").1),
                    Controller::Scripted => return Err(Error::contract("the scripted controller drives the thrower only")),
                };
                Ok((a, b))
            }
        }
    }
}
