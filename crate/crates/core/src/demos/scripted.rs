//! Scripted thrower and intercepting catcher used as demonstrators and oracles.

use crate::error::{Error, Result};
use crate::sim::ballistics::{closest_approach, position_at, solve_release};
use crate::sim::kinematics::{forward_kinematics, pseudo_inverse_apply};
use crate::sim::world::{Attachment, World, WorldState, CATCHER, THROWER};
use crate::demos::planner::{PlannerConfig, ThrowPlan, ThrowPlanner};

/// Thrower that follows a [`ThrowPlan`] and corrects the release velocity on
/// the release tick so the object passes through the target from wherever
/// the palm actually is.
pub struct ScriptedThrower {
    planner: ThrowPlanner,
    cached: Option<ThrowPlan>,
    /// Position feedback gain while tracking the plan, 1/s.
    pub tracking_gain: f64,
}

impl ScriptedThrower {
    pub fn new(world: &World, config: PlannerConfig) -> Self {
        Self {
            planner: ThrowPlanner::new(&world.config, config),
            cached: None,
            tracking_gain: 8.0,
        }
    }

    /// The plan for this episode's target; recomputed only when the target changes.
    pub fn plan(&mut self, world: &World, state: &WorldState) -> Result<&ThrowPlan> {
        let stale = self.cached.as_ref().is_none_or(|p| p.target != state.target);
        if stale {
            let plan = self
                .planner
                .plan(&world.config, world.config.thrower.nominal, state.target)
                .ok_or_else(|| Error::contract(format!("infeasible demo: no throw reaches target {:?}", state.target)))?;
            self.cached = Some(plan);
        }
        Ok(self.cached.as_ref().expect("plan cached above"))
    }

    /// Normalized thrower action for the current tick.
    pub fn act(&mut self, world: &World, state: &WorldState) -> Result<[f64; 4]> {
        let plan = self.plan(world, state)?.clone();
        let cfg = &world.config;
        let dt = cfg.control_dt();
        let scale = cfg.arm_velocity_scale;
        let k = state.tick;
        let release = plan.release_tick();
        let q = state.arms[THROWER].arm_q();
        let command = if k < release {
            let (q_now, _) = plan.reference(k as f64 * dt, dt);
            let (_, qd_next) = plan.reference((k + 1) as f64 * dt, dt);
            let mut c = [0.0; 3];
            for j in 0..3 {
                c[j] = qd_next[j] + self.tracking_gain * (q_now[j] - q[j]);
            }
            c
        } else if k == release && state.object.attachment == Attachment::HeldByThrower {
            self.release_command(world, state, &plan)
        } else {
            [0.0; 3]
        };
        let gripper = if k < release { -1.0 } else { 1.0 };
        Ok([
            (command[0] / scale).clamp(-1.0, 1.0),
            (command[1] / scale).clamp(-1.0, 1.0),
            (command[2] / scale).clamp(-1.0, 1.0),
            gripper,
        ])
    }

    /// Solves for the velocity command whose end-of-tick joint velocity puts
    /// the palm exactly on a ballistic path through the target.
    fn release_command(&self, world: &World, state: &WorldState, plan: &ThrowPlan) -> [f64; 3] {
        let cfg = &world.config;
        let c = cfg.arm_damping * state.params.damping_scale[THROWER] * cfg.physics_dt;
        let gain = 1.0 - (1.0 - c).powi(cfg.decimation as i32);
        let open = cfg.gripper_range[1];
        let mut command = plan.release_qd;
        for _ in 0..8 {
            let next = world.predict_arm(state, THROWER, command, open);
            let q = next.arm_q();
            let pose = forward_kinematics(&q, cfg.thrower.base, cfg.link_lengths);
            let wanted = solve_release(pose.palm, plan.target, plan.flight_time, cfg.gravity);
            let planned = pose.palm_velocity(&plan.release_qd);
            let fix = pseudo_inverse_apply(&pose.jacobian, [wanted[0] - planned[0], wanted[1] - planned[1]], 0.0);
            let qd = next.arm_qd();
            for j in 0..3 {
                let goal = plan.release_qd[j] + fix[j];
                command[j] = (command[j] + (goal - qd[j]) / gain).clamp(-cfg.arm_velocity_limit, cfg.arm_velocity_limit);
            }
        }
        command
    }
}

/// Catcher oracle: keeps the gripper closed and servoes the palm to the
/// point where the object's current parabola passes closest to the target.
#[derive(Debug, Clone)]
pub struct InterceptingCatcher {
    pub gain: f64,
    pub max_palm_speed: f64,
    pub posture_gain: f64,
    pub horizon: f64,
}

impl Default for InterceptingCatcher {
    fn default() -> Self {
        Self {
            gain: 8.0,
            max_palm_speed: 2.0,
            posture_gain: 2.0,
            horizon: 1.5,
        }
    }
}

impl InterceptingCatcher {
    pub fn goal(&self, world: &World, state: &WorldState) -> [f64; 2] {
        let o = &state.object;
        if o.attachment == Attachment::Free {
            let (t, _) = closest_approach(o.position, o.velocity, world.config.gravity, state.target, self.horizon);
            position_at(o.position, o.velocity, world.config.gravity, t)
        } else {
            state.target
        }
    }

    pub fn act(&self, world: &World, state: &WorldState) -> [f64; 4] {
        let cfg = &world.config;
        let q = state.arms[CATCHER].arm_q();
        let pose = forward_kinematics(&q, cfg.catcher.base, cfg.link_lengths);
        let goal = self.goal(world, state);
        let mut v = [self.gain * (goal[0] - pose.palm[0]), self.gain * (goal[1] - pose.palm[1])];
        let speed = v[0].hypot(v[1]);
        if speed > self.max_palm_speed {
            v = [v[0] * self.max_palm_speed / speed, v[1] * self.max_palm_speed / speed];
        }
        let mut qd = pseudo_inverse_apply(&pose.jacobian, v, 0.01);
        // Null-space pull toward the nominal posture.
        let mut post = [0.0; 3];
        for j in 0..3 {
            post[j] = self.posture_gain * (cfg.catcher.nominal[j] - q[j]);
        }
        let moved = pose.palm_velocity(&post);
        let back = pseudo_inverse_apply(&pose.jacobian, moved, 0.01);
        for j in 0..3 {
            qd[j] += post[j] - back[j];
        }
        let scale = cfg.arm_velocity_scale;
        [
            (qd[0] / scale).clamp(-1.0, 1.0),
            (qd[1] / scale).clamp(-1.0, 1.0),
            (qd[2] / scale).clamp(-1.0, 1.0),
            -1.0,
        ]
    }
}
