//! Evaluation episodes, metrics, and trajectory export.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{Env, Perception};
use crate::error::{Error, Result};
use crate::mappo::team::{EpisodeDriver, Team};
use crate::seeding::{derive_seed, rng_for, stream};
use crate::sim::export::{write_line, EpisodeMarker, TrajectoryRecord};
use crate::sim::reward::RewardTerms;
use crate::sim::world::World;

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configs serialize to JSON");
    let mut h = Sha256::new();
    h.update(&json);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectStats {
    pub object: String,
    pub episodes: u32,
    pub hits: u32,
    pub successes: u32,
    pub hit_rate: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub thrower: String,
    pub catcher: String,
    pub object_set: String,
    pub episodes: u32,
    pub hit_rate: f64,
    pub success_rate: f64,
    pub per_object: Vec<ObjectStats>,
    pub causes: BTreeMap<String, u32>,
    pub mean_episode_return: f64,
    /// Per-step means of the reward breakdown.
    pub mean_terms: RewardTerms,
    pub seed: u64,
    pub config_digest: String,
}

fn team_names(team: &Team) -> (String, String) {
    match team {
        Team::Joint(_) => ("joint".into(), "joint".into()),
        Team::Pair { thrower, catcher } => (thrower.name().into(), catcher.name().into()),
    }
}

/// Seed of evaluation episode `k`; episodes are independent of each other.
fn episode_env(world: &World, perception: &Perception, seed: u64, k: u32) -> Result<Env> {
    Env::new(world, perception, derive_seed(seed, &[stream::EVAL]), k as u64)
}

/// Rolls out `episodes` episodes at the policy mean and aggregates hit and
/// success rates overall and per object.
pub fn evaluate(world: &World, perception: &Perception, team: &Team, episodes: u32, seed: u64) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::contract("evaluation needs at least one episode"));
    }
    let mut per_object: BTreeMap<String, ObjectStats> = BTreeMap::new();
    let mut causes = BTreeMap::new();
    let mut return_sum = 0.0;
    let mut term_sum = RewardTerms::default();
    let mut steps = 0u64;
    let mut driver = EpisodeDriver::new(world, team);
    for k in 0..episodes {
        let mut env = episode_env(world, perception, seed, k)?;
        let mut rng = rng_for(seed, &[stream::EVAL, k as u64, stream::POLICY_SAMPLING]);
        driver.begin(world, &env.state)?;
        let mut obs = env.observe();
        let outcome = loop {
            let (a, b) = driver.act(world, &env.state, &obs, true, &mut rng)?;
            let (out, next) = env.step(world, perception, &a, &b)?;
            return_sum += out.reward;
            term_sum.add_assign(&out.terms);
            steps += 1;
            obs = next;
            if out.terminated {
                break out;
            }
        };
        let name = env.state.object.shape.name.clone();
        let s = per_object.entry(name.clone()).or_insert_with(|| ObjectStats {
            object: name,
            ..Default::default()
        });
        s.episodes += 1;
        s.hits += env.state.hit as u32;
        s.successes += outcome.success as u32;
        *causes.entry(outcome.cause.name().to_string()).or_insert(0) += 1;
    }
    let mut hits = 0;
    let mut successes = 0;
    let per_object: Vec<ObjectStats> = per_object
        .into_values()
        .map(|mut s| {
            s.hit_rate = s.hits as f64 / s.episodes as f64;
            s.success_rate = s.successes as f64 / s.episodes as f64;
            hits += s.hits;
            successes += s.successes;
            s
        })
        .collect();
    let (thrower, catcher) = team_names(team);
    Ok(EvalReport {
        thrower,
        catcher,
        object_set: format!("{:?}", world.config.object_set).to_lowercase(),
        episodes,
        hit_rate: hits as f64 / episodes as f64,
        success_rate: successes as f64 / episodes as f64,
        per_object,
        causes,
        mean_episode_return: return_sum / episodes as f64,
        mean_terms: term_sum.scaled(1.0 / steps.max(1) as f64),
        seed,
        config_digest: digest(&world.config),
    })
}

/// Writes an episode marker followed by one record per tick (including the
/// reset state) for each episode, as line-delimited JSON.
pub fn export_trajectories(
    world: &World,
    perception: &Perception,
    team: &Team,
    episodes: u32,
    seed: u64,
    out: &mut impl Write,
) -> Result<()> {
    let mut driver = EpisodeDriver::new(world, team);
    for k in 0..episodes {
        let mut env = episode_env(world, perception, seed, k)?;
        let mut rng = rng_for(seed, &[stream::EXPORT, k as u64]);
        driver.begin(world, &env.state)?;
        write_line(
            out,
            &EpisodeMarker {
                episode: k,
                object: env.state.object.shape.name.clone(),
                target: env.state.target,
                seed,
            },
        )?;
        write_line(out, &TrajectoryRecord::capture(&world.config, k, &env.state, None))?;
        let mut obs = env.observe();
        while !env.state.terminated {
            let (a, b) = driver.act(world, &env.state, &obs, true, &mut rng)?;
            let (outcome, next) = env.step(world, perception, &a, &b)?;
            write_line(out, &TrajectoryRecord::capture(&world.config, k, &env.state, Some(&outcome)))?;
            obs = next;
        }
    }
    Ok(())
}
