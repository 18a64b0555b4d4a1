//! World state, reset and the fixed-step simulation loop.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::seeding::Rng;
use crate::sim::ballistics::ballistic_step;
use crate::sim::config::{ArmConfig, WorldConfig};
use crate::sim::kinematics::{distance, forward_kinematics, ik_palm, segment_distance, ArmPose};
use crate::sim::objects::{NamedShape, ObjectSet};
use crate::sim::reward::RewardTerms;

pub const THROWER: usize = 0;
pub const CATCHER: usize = 1;
/// Joints per arm: three arm joints and the gripper.
pub const ARM_DOF: usize = 4;
pub const ACTION_DIM: usize = ARM_DOF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attachment {
    Free,
    HeldByThrower,
    HeldByCatcher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCause {
    None,
    NumericFault,
    ObjectFell,
    GoalDeviation,
    HandsTooClose,
    UnexpectedContact,
    OutOfView,
    Timeout,
}

impl FailureCause {
    pub const ALL: [FailureCause; 8] = [
        FailureCause::None,
        FailureCause::NumericFault,
        FailureCause::ObjectFell,
        FailureCause::GoalDeviation,
        FailureCause::HandsTooClose,
        FailureCause::UnexpectedContact,
        FailureCause::OutOfView,
        FailureCause::Timeout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureCause::None => "none",
            FailureCause::NumericFault => "numeric-fault",
            FailureCause::ObjectFell => "object-fell",
            FailureCause::GoalDeviation => "goal-deviation",
            FailureCause::HandsTooClose => "hands-too-close",
            FailureCause::UnexpectedContact => "unexpected-contact",
            FailureCause::OutOfView => "out-of-view",
            FailureCause::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub q: [f64; 4],
    pub qd: [f64; 4],
    /// Commanded arm joint velocities, rad/s.
    pub velocity_command: [f64; 3],
    /// Commanded gripper aperture, m.
    pub gripper_command: f64,
    /// Integrated velocity command; only matters with nonzero arm stiffness.
    pub position_reference: [f64; 3],
    /// Actuator torques applied during the last substep.
    pub torque: [f64; 4],
}

impl ArmState {
    fn at_rest(q_arm: [f64; 3], aperture: f64) -> Self {
        Self {
            q: [q_arm[0], q_arm[1], q_arm[2], aperture],
            qd: [0.0; 4],
            velocity_command: [0.0; 3],
            gripper_command: aperture,
            position_reference: q_arm,
            torque: [0.0; 4],
        }
    }

    pub fn arm_q(&self) -> [f64; 3] {
        [self.q[0], self.q[1], self.q[2]]
    }

    pub fn arm_qd(&self) -> [f64; 3] {
        [self.qd[0], self.qd[1], self.qd[2]]
    }

    pub fn aperture(&self) -> f64 {
        self.q[3]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub shape: NamedShape,
    pub mass: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub angle: f64,
    pub spin: f64,
    pub attachment: Attachment,
    pub color: [f64; 3],
}

/// Per-episode physical and sensor perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeParams {
    pub stiffness_scale: [f64; 2],
    pub damping_scale: [f64; 2],
    pub restitution_offset: f64,
    pub friction_offset: f64,
    /// Bias on proprioceptive readings: q (thrower, catcher) then q̇ (thrower, catcher).
    pub obs_bias: [f64; 16],
    /// Bias on normalized actions: thrower then catcher.
    pub action_bias: [f64; 8],
    pub background_noise: bool,
}

/// Proprioceptive readings as the agents see them, noise and bias included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub q: [[f64; 4]; 2],
    pub qd: [[f64; 4]; 2],
}

/// Free-flight bookkeeping: origin of the current parabola.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSegment {
    pub id: u32,
    pub origin: [f64; 2],
    pub velocity: [f64; 2],
    pub substeps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u32,
    pub arms: [ArmState; 2],
    pub object: ObjectState,
    pub target: [f64; 2],
    pub params: EpisodeParams,
    pub reading: Reading,
    #[serde(skip, default = "placeholder_rng")]
    pub rng: Rng,
    pub terminated: bool,
    /// The object has touched the catcher palm region at some point.
    pub hit: bool,
    pub release_tick: Option<u32>,
    pub flight: Option<FlightSegment>,
    pub flight_count: u32,
}

fn placeholder_rng() -> Rng {
    Rng::seed_from_u64(0)
}

impl WorldState {
    pub fn pose(&self, config: &WorldConfig, arm: usize) -> ArmPose<f64> {
        let base = arm_config(config, arm).base;
        forward_kinematics(&self.arms[arm].arm_q(), base, config.link_lengths)
    }

    pub fn time(&self, config: &WorldConfig) -> f64 {
        self.tick as f64 * config.control_dt()
    }

    pub fn caught(&self) -> bool {
        self.object.attachment == Attachment::HeldByCatcher
    }

    fn all_finite(&self) -> bool {
        let arms = self.arms.iter().all(|a| {
            a.q.iter().chain(&a.qd).chain(&a.torque).all(|v| v.is_finite())
        });
        let o = &self.object;
        arms && o.position.iter().chain(&o.velocity).all(|v| v.is_finite()) && o.angle.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub l_target: f64,
    pub l_obj: f64,
    pub l_hand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub terms: RewardTerms,
    pub terminated: bool,
    pub cause: FailureCause,
    /// Object within the catch radius of the catcher palm during this step.
    pub contact: bool,
    pub distances: Distances,
    pub caught: bool,
    /// Episode ended at the horizon with the object in the catcher's hand.
    pub success: bool,
}

pub fn arm_config(config: &WorldConfig, arm: usize) -> &ArmConfig {
    if arm == THROWER {
        &config.thrower
    } else {
        &config.catcher
    }
}

pub fn distances(config: &WorldConfig, state: &WorldState) -> Distances {
    let throw = state.pose(config, THROWER).palm;
    let catch = state.pose(config, CATCHER).palm;
    Distances {
        l_target: distance(state.object.position, state.target),
        l_obj: distance(state.object.position, catch),
        l_hand: distance(throw, catch),
    }
}

pub fn compute_reward(config: &WorldConfig, state: &WorldState, contact: bool) -> (RewardTerms, Distances) {
    let d = distances(config, state);
    let mut torque = [0.0; 8];
    let mut velocity = [0.0; 8];
    for arm in 0..2 {
        torque[arm * 4..arm * 4 + 4].copy_from_slice(&state.arms[arm].torque);
        velocity[arm * 4..arm * 4 + 4].copy_from_slice(&state.arms[arm].qd);
    }
    let terms = RewardTerms::from_distances(d.l_target, d.l_obj, d.l_hand, contact, &torque, &velocity);
    (terms, d)
}

/// True when any link touches the ground, links of different arms come
/// closer than the clearance, or an arm's first and last links do.
pub fn unexpected_contact(config: &WorldConfig, state: &WorldState) -> bool {
    let clearance = config.failure.link_clearance;
    let poses = [state.pose(config, THROWER), state.pose(config, CATCHER)];
    for pose in &poses {
        if pose.points[1..].iter().any(|p| p[1] <= 0.0) {
            return true;
        }
        let s = pose.segments();
        if segment_distance(s[0].0, s[0].1, s[2].0, s[2].1) < clearance {
            return true;
        }
    }
    for a in poses[0].segments() {
        for b in poses[1].segments() {
            if segment_distance(a.0, a.1, b.0, b.1) < clearance {
                return true;
            }
        }
    }
    false
}

/// First matching failure in fixed order: numeric fault, object fell, goal
/// deviation, hands too close, unexpected contact, out of view, timeout.
pub fn check_failure(config: &WorldConfig, state: &WorldState) -> FailureCause {
    if !state.all_finite() {
        return FailureCause::NumericFault;
    }
    let f = &config.failure;
    if state.object.position[1] < f.object_min_height {
        return FailureCause::ObjectFell;
    }
    let d = distances(config, state);
    let catch_palm = state.pose(config, CATCHER).palm;
    if distance(catch_palm, state.target) > f.goal_deviation {
        return FailureCause::GoalDeviation;
    }
    if d.l_hand < f.hand_min_distance {
        return FailureCause::HandsTooClose;
    }
    if unexpected_contact(config, state) {
        return FailureCause::UnexpectedContact;
    }
    if !config.view.contains(state.object.position) {
        return FailureCause::OutOfView;
    }
    if state.tick >= config.max_steps {
        return FailureCause::Timeout;
    }
    FailureCause::None
}

fn uniform(rng: &mut Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        Uniform::new_inclusive(range[0], range[1]).expect("validated range").sample(rng)
    }
}

fn gaussian(rng: &mut Rng, std: f64) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    }
}

/// The simulator: immutable configuration plus the resolved object set.
#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub objects: ObjectSet,
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let mut objects = ObjectSet::builtin(config.object_set);
        if let Some(name) = &config.object {
            let shape = objects
                .get(name)
                .cloned()
                .ok_or_else(|| Error::config(format!("object {name:?} is not in the {:?} set", config.object_set)))?;
            objects.shapes = vec![shape];
        }
        Ok(Self { config, objects })
    }

    /// Samples a target point in the catcher's reachable band.
    pub fn sample_target(&self, rng: &mut Rng) -> Result<[f64; 2]> {
        let t = &self.config.target;
        let base = self.config.catcher.base;
        for _ in 0..t.max_retries.max(1) {
            let r = uniform(rng, [t.radius[0].powi(2), t.radius[1].powi(2)]).sqrt();
            let a = uniform(rng, t.angle_deg).to_radians();
            let p = [base[0] + r * a.cos(), base[1] + r * a.sin()];
            if p[1] >= t.min_height && self.reachable_by_catcher(p) {
                return Ok(p);
            }
        }
        Err(Error::contract("no reachable target found within the retry budget"))
    }

    fn reachable_by_catcher(&self, p: [f64; 2]) -> bool {
        let c = &self.config.catcher;
        (0..24).any(|k| {
            let angle = std::f64::consts::PI * (k as f64 / 12.0);
            [1.0, -1.0].iter().any(|&elbow| {
                ik_palm(c.base, self.config.link_lengths, p, angle, elbow).is_some_and(|q| {
                    (0..3).all(|j| q[j] >= c.joint_lower[j] && q[j] <= c.joint_upper[j])
                })
            })
        })
    }

    pub fn reset(&self, rng: &mut Rng) -> Result<WorldState> {
        let cfg = &self.config;
        let r = &cfg.randomization;
        let mut rng = Rng::seed_from_u64(rng.next_u64());
        let shape = self.objects.shapes[rng.random_range(0..self.objects.len())].clone();
        let target = self.sample_target(&mut rng)?;
        let (mass, color, params) = if r.enabled {
            let mass = uniform(&mut rng, r.mass);
            let color = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let mut obs_bias = [0.0; 16];
            for b in &mut obs_bias {
                *b = gaussian(&mut rng, r.obs_bias_std);
            }
            let mut action_bias = [0.0; 8];
            for b in &mut action_bias {
                *b = gaussian(&mut rng, r.action_bias_std);
            }
            let params = EpisodeParams {
                stiffness_scale: [uniform(&mut rng, r.stiffness_scale), uniform(&mut rng, r.stiffness_scale)],
                damping_scale: [uniform(&mut rng, r.damping_scale), uniform(&mut rng, r.damping_scale)],
                restitution_offset: uniform(&mut rng, r.restitution_offset),
                friction_offset: uniform(&mut rng, r.friction_offset),
                obs_bias,
                action_bias,
                background_noise: rng.random::<f64>() < r.background_prob,
            };
            (mass, color, params)
        } else {
            let params = EpisodeParams {
                stiffness_scale: [1.0; 2],
                damping_scale: [1.0; 2],
                restitution_offset: 0.0,
                friction_offset: 0.0,
                obs_bias: [0.0; 16],
                action_bias: [0.0; 8],
                background_noise: false,
            };
            (r.nominal_mass, r.nominal_color, params)
        };
        let jitter = if r.enabled { r.pose_jitter } else { 0.0 };
        let arms = [THROWER, CATCHER].map(|arm| {
            let c = arm_config(cfg, arm);
            let mut q = c.nominal;
            for j in 0..3 {
                q[j] = (q[j] + uniform(&mut rng, [-jitter, jitter])).clamp(c.joint_lower[j], c.joint_upper[j]);
            }
            ArmState::at_rest(q, cfg.gripper_range[0])
        });
        let pose = forward_kinematics(&arms[THROWER].arm_q(), cfg.thrower.base, cfg.link_lengths);
        let object = ObjectState {
            shape,
            mass,
            position: pose.palm,
            velocity: [0.0; 2],
            angle: pose.palm_angle,
            spin: 0.0,
            attachment: Attachment::HeldByThrower,
            color,
        };
        let mut state = WorldState {
            tick: 0,
            arms,
            object,
            target,
            params,
            reading: Reading {
                q: [[0.0; 4]; 2],
                qd: [[0.0; 4]; 2],
            },
            rng,
            terminated: false,
            hit: false,
            release_tick: None,
            flight: None,
            flight_count: 0,
        };
        self.sense(&mut state);
        Ok(state)
    }

    /// Samples noisy proprioceptive readings into `state.reading`.
    fn sense(&self, state: &mut WorldState) {
        let r = &self.config.randomization;
        let std = if r.enabled { r.obs_noise_std } else { 0.0 };
        for arm in 0..2 {
            for j in 0..4 {
                let nq = gaussian(&mut state.rng, std);
                let nv = gaussian(&mut state.rng, std);
                state.reading.q[arm][j] = state.arms[arm].q[j] + state.params.obs_bias[arm * 4 + j] + nq;
                state.reading.qd[arm][j] = state.arms[arm].qd[j] + state.params.obs_bias[8 + arm * 4 + j] + nv;
            }
        }
    }

    fn apply_action(&self, state: &mut WorldState, arm: usize, action: &[f64]) {
        let cfg = &self.config;
        let r = &cfg.randomization;
        let std = if r.enabled { r.action_noise_std } else { 0.0 };
        let mut a = [0.0; 4];
        for j in 0..4 {
            let noise = gaussian(&mut state.rng, std);
            a[j] = action[j].clamp(-1.0, 1.0) + state.params.action_bias[arm * 4 + j] + noise;
        }
        let s = &mut state.arms[arm];
        for j in 0..3 {
            s.velocity_command[j] = (a[j] * cfg.arm_velocity_scale).clamp(-cfg.arm_velocity_limit, cfg.arm_velocity_limit);
        }
        let [lo, hi] = cfg.gripper_range;
        s.gripper_command = (lo + 0.5 * (a[3] + 1.0) * (hi - lo)).clamp(lo, hi);
    }

    fn integrate_arm(&self, state: &mut WorldState, arm: usize) {
        let cfg = &self.config;
        let dt = cfg.physics_dt;
        let c = arm_config(cfg, arm);
        let kp_scale = state.params.stiffness_scale[arm];
        let kd_scale = state.params.damping_scale[arm];
        let held = match state.object.attachment {
            Attachment::HeldByThrower => arm == THROWER,
            Attachment::HeldByCatcher => arm == CATCHER,
            Attachment::Free => false,
        };
        let load = if held {
            let pose = forward_kinematics(&state.arms[arm].arm_q(), c.base, cfg.link_lengths);
            let w = -state.object.mass * cfg.gravity;
            [pose.jacobian[1][0] * w, pose.jacobian[1][1] * w, pose.jacobian[1][2] * w]
        } else {
            [0.0; 3]
        };
        let s = &mut state.arms[arm];
        let kp = cfg.arm_stiffness * kp_scale;
        let kd = cfg.arm_damping * kd_scale;
        for j in 0..3 {
            s.position_reference[j] += s.velocity_command[j] * dt;
            let tau = (kp * (s.position_reference[j] - s.q[j]) + kd * (s.velocity_command[j] - s.qd[j]))
                .clamp(-cfg.arm_torque_limit, cfg.arm_torque_limit);
            s.torque[j] = tau;
            s.qd[j] = (s.qd[j] + dt * (tau + load[j])).clamp(-cfg.arm_velocity_limit, cfg.arm_velocity_limit);
            s.q[j] += dt * s.qd[j];
            if s.q[j] < c.joint_lower[j] || s.q[j] > c.joint_upper[j] {
                s.q[j] = s.q[j].clamp(c.joint_lower[j], c.joint_upper[j]);
                s.qd[j] = 0.0;
            }
        }
        let kp = cfg.gripper_stiffness * kp_scale;
        let kd = cfg.gripper_damping * kd_scale;
        let tau = (kp * (s.gripper_command - s.q[3]) - kd * s.qd[3]).clamp(-cfg.gripper_torque_limit, cfg.gripper_torque_limit);
        s.torque[3] = tau;
        s.qd[3] = (s.qd[3] + dt * tau).clamp(-cfg.gripper_velocity_limit, cfg.gripper_velocity_limit);
        s.q[3] += dt * s.qd[3];
        let [lo, hi] = cfg.gripper_range;
        if s.q[3] < lo || s.q[3] > hi {
            s.q[3] = s.q[3].clamp(lo, hi);
            s.qd[3] = 0.0;
        }
    }

    /// Arm state after one control step with the given commands, ignoring
    /// action noise. The object is not advanced.
    pub fn predict_arm(&self, state: &WorldState, arm: usize, velocity_command: [f64; 3], gripper_command: f64) -> ArmState {
        let mut s = state.clone();
        s.arms[arm].velocity_command = velocity_command;
        s.arms[arm].gripper_command = gripper_command;
        for _ in 0..self.config.decimation {
            self.integrate_arm(&mut s, arm);
        }
        s.arms[arm].clone()
    }

    fn start_flight(state: &mut WorldState) {
        state.flight = Some(FlightSegment {
            id: state.flight_count,
            origin: state.object.position,
            velocity: state.object.velocity,
            substeps: 0,
        });
        state.flight_count += 1;
    }

    /// Moves the object one substep; returns whether it was inside the
    /// catcher's contact radius.
    fn advance_object(&self, state: &mut WorldState) -> bool {
        let cfg = &self.config;
        let poses = [state.pose(cfg, THROWER), state.pose(cfg, CATCHER)];
        match state.object.attachment {
            Attachment::HeldByThrower | Attachment::HeldByCatcher => {
                let arm = if state.object.attachment == Attachment::HeldByThrower { THROWER } else { CATCHER };
                let pose = &poses[arm];
                let qd = state.arms[arm].arm_qd();
                state.object.position = pose.palm;
                state.object.velocity = pose.palm_velocity(&qd);
                state.object.angle = pose.palm_angle;
                if state.arms[arm].aperture() >= cfg.release_threshold {
                    state.object.attachment = Attachment::Free;
                    state.object.spin = qd.iter().sum();
                    if arm == THROWER && state.release_tick.is_none() {
                        state.release_tick = Some(state.tick);
                    }
                    Self::start_flight(state);
                }
            }
            Attachment::Free => {
                let (p, v) = ballistic_step(state.object.position, state.object.velocity, cfg.gravity, cfg.physics_dt);
                state.object.position = p;
                state.object.velocity = v;
                state.object.angle += state.object.spin * cfg.physics_dt;
                if let Some(f) = &mut state.flight {
                    f.substeps += 1;
                }
            }
        }
        let palm = poses[CATCHER].palm;
        let d = distance(state.object.position, palm);
        let inside = d < cfg.catch_radius;
        if inside && state.object.attachment == Attachment::Free {
            let palm_v = poses[CATCHER].palm_velocity(&state.arms[CATCHER].arm_qd());
            if state.arms[CATCHER].aperture() < cfg.close_threshold {
                state.object.attachment = Attachment::HeldByCatcher;
                state.object.position = palm;
                state.object.velocity = palm_v;
                state.object.angle = poses[CATCHER].palm_angle;
                state.object.spin = 0.0;
                state.flight = None;
            } else if d > 0.0 {
                self.bounce(state, palm, palm_v, d);
            }
        }
        inside
    }

    fn bounce(&self, state: &mut WorldState, palm: [f64; 2], palm_v: [f64; 2], d: f64) {
        let cfg = &self.config;
        let n = [(state.object.position[0] - palm[0]) / d, (state.object.position[1] - palm[1]) / d];
        let u = [state.object.velocity[0] - palm_v[0], state.object.velocity[1] - palm_v[1]];
        let un = u[0] * n[0] + u[1] * n[1];
        if un >= 0.0 {
            return;
        }
        let e = (cfg.base_restitution + state.params.restitution_offset).max(0.0);
        let mu = (cfg.base_friction + state.params.friction_offset).clamp(0.0, 1.0);
        let ut = [u[0] - un * n[0], u[1] - un * n[1]];
        state.object.velocity = [
            palm_v[0] - e * un * n[0] + (1.0 - mu) * ut[0],
            palm_v[1] - e * un * n[1] + (1.0 - mu) * ut[1],
        ];
        Self::start_flight(state);
    }

    /// Advances one control step with normalized actions in [−1, 1]⁴ per agent.
    pub fn step(&self, state: &mut WorldState, throw_action: &[f64], catch_action: &[f64]) -> Result<StepOutcome> {
        check_dim("thrower action", ACTION_DIM, throw_action.len())?;
        check_dim("catcher action", ACTION_DIM, catch_action.len())?;
        if state.terminated {
            return Err(Error::contract("step called on a terminated episode"));
        }
        let numeric_fault = throw_action.iter().chain(catch_action).any(|a| !a.is_finite());
        let mut contact = false;
        if !numeric_fault {
            self.apply_action(state, THROWER, throw_action);
            self.apply_action(state, CATCHER, catch_action);
            for _ in 0..self.config.decimation {
                self.integrate_arm(state, THROWER);
                self.integrate_arm(state, CATCHER);
                contact |= self.advance_object(state);
                if !state.all_finite() {
                    break;
                }
            }
        }
        state.tick += 1;
        state.hit |= contact;
        let cause = if numeric_fault { FailureCause::NumericFault } else { check_failure(&self.config, state) };
        if cause == FailureCause::NumericFault {
            state.terminated = true;
            return Ok(StepOutcome {
                reward: 0.0,
                terms: RewardTerms::default(),
                terminated: true,
                cause,
                contact,
                distances: Distances {
                    l_target: f64::NAN,
                    l_obj: f64::NAN,
                    l_hand: f64::NAN,
                },
                caught: false,
                success: false,
            });
        }
        self.sense(state);
        let (terms, distances) = compute_reward(&self.config, state, contact);
        let terminated = cause != FailureCause::None;
        state.terminated = terminated;
        let caught = state.caught();
        Ok(StepOutcome {
            reward: terms.total(),
            terms,
            terminated,
            cause,
            contact,
            distances,
            caught,
            success: cause == FailureCause::Timeout && caught,
        })
    }
}
