//! Throw planning: pick a release pose and flight time for a target.

use serde::{Deserialize, Serialize};

use crate::sim::ballistics::{apex_height, solve_release};
use crate::sim::config::WorldConfig;
use crate::sim::kinematics::{distance, forward_kinematics, ik_palm, pseudo_inverse_apply, segment_distance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Largest joint speed the plan may ask for at release, rad/s.
    pub max_joint_speed: f64,
    pub max_apex: f64,
    pub max_flight_time: f64,
    pub min_flight_time: f64,
    pub flight_time_step: f64,
    /// Release palm grid.
    pub release_x: [f64; 2],
    pub release_z: [f64; 2],
    pub grid_step: f64,
    pub palm_angle_step_deg: f64,
    /// Ticks of constant joint acceleration before release.
    pub accel_ticks: u32,
    pub min_windup_ticks: u32,
    /// Peak joint speed allowed during the wind-up, rad/s.
    pub windup_speed: f64,
    pub min_palm_height: f64,
    pub min_link_height: f64,
    /// Minimum palm distance to the catcher's nominal palm along the plan.
    pub catcher_clearance: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_joint_speed: 5.0,
            max_apex: 1.45,
            max_flight_time: 1.0,
            min_flight_time: 0.2,
            flight_time_step: 0.02,
            release_x: [-0.1, 0.45],
            release_z: [0.4, 1.0],
            grid_step: 0.05,
            palm_angle_step_deg: 15.0,
            accel_ticks: 8,
            min_windup_ticks: 27,
            windup_speed: 4.0,
            min_palm_height: 0.25,
            min_link_height: 0.05,
            catcher_clearance: 0.2,
        }
    }
}

/// A throw: wind-up to `pre_q`, accelerate uniformly to `release_qd` at
/// `release_q`, open the gripper on the last acceleration tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThrowPlan {
    pub target: [f64; 2],
    pub start_q: [f64; 3],
    pub pre_q: [f64; 3],
    pub release_q: [f64; 3],
    pub release_qd: [f64; 3],
    pub release_palm: [f64; 2],
    pub release_velocity: [f64; 2],
    pub flight_time: f64,
    pub windup_ticks: u32,
    pub accel_ticks: u32,
}

impl ThrowPlan {
    /// Tick on which the gripper is commanded open.
    pub fn release_tick(&self) -> u32 {
        self.windup_ticks + self.accel_ticks - 1
    }

    /// Planned joint position and velocity at time `t` since episode start.
    pub fn reference(&self, t: f64, control_dt: f64) -> ([f64; 3], [f64; 3]) {
        let tw = self.windup_ticks as f64 * control_dt;
        let ta = self.accel_ticks as f64 * control_dt;
        let mut q = [0.0; 3];
        let mut qd = [0.0; 3];
        if t <= tw {
            let s = (t / tw).clamp(0.0, 1.0);
            let pos = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
            let vel = 30.0 * s * s * (1.0 - s) * (1.0 - s) / tw;
            for j in 0..3 {
                let d = self.pre_q[j] - self.start_q[j];
                q[j] = self.start_q[j] + d * pos;
                qd[j] = d * vel;
            }
        } else {
            let u = (t - tw).min(ta);
            for j in 0..3 {
                let acc = self.release_qd[j] / ta;
                q[j] = self.pre_q[j] + 0.5 * acc * u * u;
                qd[j] = acc * u;
            }
            if t > tw + ta {
                q = self.release_q;
                qd = [0.0; 3];
            }
        }
        (q, qd)
    }
}

struct Candidate {
    q: [f64; 3],
    palm: [f64; 2],
    jacobian: [[f64; 3]; 2],
}

/// Precomputed release-pose candidates for one world configuration.
pub struct ThrowPlanner {
    pub config: PlannerConfig,
    candidates: Vec<Candidate>,
}

fn within_limits(world: &WorldConfig, q: &[f64; 3]) -> bool {
    (0..3).all(|j| q[j] >= world.thrower.joint_lower[j] && q[j] <= world.thrower.joint_upper[j])
}

impl ThrowPlanner {
    pub fn new(world: &WorldConfig, config: PlannerConfig) -> Self {
        let mut candidates = Vec::new();
        let steps = |r: [f64; 2], h: f64| ((r[1] - r[0]) / h).round() as usize;
        let nx = steps(config.release_x, config.grid_step);
        let nz = steps(config.release_z, config.grid_step);
        let na = (270.0 / config.palm_angle_step_deg).round() as usize;
        for ix in 0..=nx {
            for iz in 0..=nz {
                let palm = [
                    config.release_x[0] + ix as f64 * config.grid_step,
                    config.release_z[0] + iz as f64 * config.grid_step,
                ];
                for ia in 0..=na {
                    let angle = (-90.0 + ia as f64 * config.palm_angle_step_deg).to_radians();
                    for elbow in [-1.0, 1.0] {
                        let Some(q) = ik_palm(world.thrower.base, world.link_lengths, palm, angle, elbow) else {
                            continue;
                        };
                        if !within_limits(world, &q) {
                            continue;
                        }
                        let pose = forward_kinematics(&q, world.thrower.base, world.link_lengths);
                        candidates.push(Candidate {
                            q,
                            palm: pose.palm,
                            jacobian: pose.jacobian,
                        });
                    }
                }
            }
        }
        Self { config, candidates }
    }

    fn pose_ok(&self, world: &WorldConfig, q: &[f64; 3]) -> bool {
        if !within_limits(world, q) {
            return false;
        }
        let pose = forward_kinematics(q, world.thrower.base, world.link_lengths);
        if pose.points[1..].iter().any(|p| p[1] < self.config.min_link_height) || pose.palm[1] < self.config.min_palm_height {
            return false;
        }
        let s = pose.segments();
        if segment_distance(s[0].0, s[0].1, s[2].0, s[2].1) < 2.0 * world.failure.link_clearance {
            return false;
        }
        let catcher = forward_kinematics(&world.catcher.nominal, world.catcher.base, world.link_lengths);
        if distance(pose.palm, catcher.palm) < self.config.catcher_clearance {
            return false;
        }
        s.iter().all(|a| catcher.segments().iter().all(|b| segment_distance(a.0, a.1, b.0, b.1) > 0.1))
    }

    fn path_ok(&self, world: &WorldConfig, plan: &ThrowPlan) -> bool {
        let dt = world.control_dt();
        let end = (plan.windup_ticks + plan.accel_ticks) as f64 * dt;
        (0..=40).all(|k| {
            let (q, _) = plan.reference(end * k as f64 / 40.0, dt);
            self.pose_ok(world, &q)
        })
    }

    /// Plans a throw from `start_q` toward `target`, preferring the longest
    /// feasible flight. Returns `None` when no candidate satisfies the limits.
    pub fn plan(&self, world: &WorldConfig, start_q: [f64; 3], target: [f64; 2]) -> Option<ThrowPlan> {
        let c = &self.config;
        let g = world.gravity;
        let ta = c.accel_ticks as f64 * world.control_dt();
        let n_t = ((c.max_flight_time - c.min_flight_time) / c.flight_time_step).round() as usize;
        for k in 0..=n_t {
            let t = c.max_flight_time - k as f64 * c.flight_time_step;
            let mut feasible: Vec<(f64, usize, [f64; 3], [f64; 2])> = Vec::new();
            for (i, cand) in self.candidates.iter().enumerate() {
                let v = solve_release(cand.palm, target, t, g);
                if apex_height(cand.palm, v, g) > c.max_apex {
                    continue;
                }
                let qd = pseudo_inverse_apply(&cand.jacobian, v, 0.0);
                let peak = qd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if peak <= c.max_joint_speed {
                    feasible.push((peak, i, qd, v));
                }
            }
            feasible.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (_, i, qd, v) in feasible {
                let cand = &self.candidates[i];
                let mut pre_q = [0.0; 3];
                for j in 0..3 {
                    pre_q[j] = cand.q[j] - 0.5 * qd[j] * ta;
                }
                let travel = (0..3).map(|j| (pre_q[j] - start_q[j]).abs()).fold(0.0, f64::max);
                let windup_time = 1.875 * travel / c.windup_speed;
                let windup_ticks = ((windup_time / world.control_dt()).ceil() as u32).max(c.min_windup_ticks);
                let plan = ThrowPlan {
                    target,
                    start_q,
                    pre_q,
                    release_q: cand.q,
                    release_qd: qd,
                    release_palm: cand.palm,
                    release_velocity: v,
                    flight_time: t,
                    windup_ticks,
                    accel_ticks: c.accel_ticks,
                };
                if self.path_ok(world, &plan) {
                    return Some(plan);
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ballistics::position_at;

    #[test]
    fn plans_cover_the_target_band_corners() {
        let world = WorldConfig::default();
        let planner = ThrowPlanner::new(&world, PlannerConfig::default());
        let base = world.catcher.base;
        for r in world.target.radius {
            for a in world.target.angle_deg {
                let a = a.to_radians();
                let target = [base[0] + r * a.cos(), base[1] + r * a.sin()];
                let plan = planner.plan(&world, world.thrower.nominal, target).expect("feasible");
                let p = position_at(plan.release_palm, plan.release_velocity, world.gravity, plan.flight_time);
                assert!(distance(p, target) < 1e-12);
                assert!(plan.release_qd.iter().all(|v| v.abs() <= 5.0));
                let (q, qd) = plan.reference((plan.release_tick() + 1) as f64 * world.control_dt(), world.control_dt());
                for j in 0..3 {
                    assert!((q[j] - plan.release_q[j]).abs() < 1e-12);
                    assert!((qd[j] - plan.release_qd[j]).abs() < 1e-12);
                }
            }
        }
    }
}
