//! Demonstration collection with the scripted thrower.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::demos::dataset::DemoRecord;
use crate::demos::planner::PlannerConfig;
use crate::demos::scripted::{InterceptingCatcher, ScriptedThrower};
use crate::error::{Error, Result};
use crate::seeding::{rng_for, stream, Rng};
use crate::sim::ballistics::closest_approach;
use crate::sim::world::{Attachment, World, THROWER};
use crate::vision::frame::{render, RenderConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectConfig {
    /// A throw is kept when its parabola passes this close to the target, m.
    pub retain_radius: f64,
    /// Ticks recorded after the release tick.
    pub ticks_after_release: u32,
    /// Horizon for the closest-approach check, s.
    pub approach_horizon: f64,
    pub planner: PlannerConfig,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            retain_radius: 0.05,
            ticks_after_release: 3,
            approach_horizon: 1.5,
            planner: PlannerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectStats {
    pub attempted: u32,
    pub retained: u32,
    pub infeasible: u32,
    pub missed: u32,
    /// Closest approach of each retained or missed throw, m.
    pub approach_errors: Vec<f64>,
}

/// Runs `n_episodes` scripted throws and keeps the on-target ones. Each
/// episode draws its seed from `rng`; frames use a per-episode render stream.
pub fn collect_demos(
    world: &World,
    render_style: &RenderConfig,
    config: &CollectConfig,
    n_episodes: u32,
    rng: &mut Rng,
) -> Result<(Vec<DemoRecord>, CollectStats)> {
    if n_episodes == 0 {
        return Err(Error::contract("collect_demos needs at least one episode"));
    }
    let mut thrower = ScriptedThrower::new(world, config.planner.clone());
    let catcher = InterceptingCatcher::default();
    let mut stats = CollectStats::default();
    let mut records = Vec::new();
    for episode in 0..n_episodes {
        stats.attempted += 1;
        let seed = rng.next_u64();
        let mut env_rng = rng_for(seed, &[stream::ENV]);
        let mut render_rng = rng_for(seed, &[stream::RENDER]);
        let mut state = world.reset(&mut env_rng)?;
        let release = match thrower.plan(world, &state) {
            Ok(plan) => plan.release_tick(),
            Err(_) => {
                stats.infeasible += 1;
                continue;
            }
        };
        let mut episode_records = Vec::new();
        let mut approach = None;
        while state.tick <= release + config.ticks_after_release && !state.terminated {
            let action = thrower.act(world, &state)?;
            episode_records.push(DemoRecord {
                episode,
                tick: state.tick,
                action,
                q_throw: state.reading.q[THROWER],
                target: state.target,
                object_position: state.object.position,
                frame: render(&world.config, render_style, &state, &mut render_rng),
            });
            let catch = catcher.act(world, &state);
            world.step(&mut state, &action, &catch)?;
            if approach.is_none() && state.object.attachment == Attachment::Free {
                let o = &state.object;
                let (_, d) = closest_approach(o.position, o.velocity, world.config.gravity, state.target, config.approach_horizon);
                approach = Some(d);
            }
        }
        let complete = episode_records.len() as u32 == release + config.ticks_after_release + 1;
        match approach {
            Some(d) if complete && d <= config.retain_radius => {
                stats.retained += 1;
                stats.approach_errors.push(d);
                records.extend(episode_records);
            }
            other => {
                stats.missed += 1;
                if let Some(d) = other {
                    stats.approach_errors.push(d);
                }
            }
        }
    }
    if stats.retained == 0 {
        return Err(Error::contract(format!(
            "no demonstration was retained: {} attempted, {} infeasible, {} missed",
            stats.attempted, stats.infeasible, stats.missed
        )));
    }
    Ok((records, stats))
}
