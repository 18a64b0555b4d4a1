use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::kinematics::ik_palm;

/// Which built-in object family an episode draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectSetKind {
    Train,
    Unseen,
}

/// Per-arm joint configuration. Index 0..3 are the arm joints, 3 is the gripper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub base: [f64; 2],
    pub joint_lower: [f64; 3],
    pub joint_upper: [f64; 3],
    /// Nominal arm pose the episode starts near.
    pub nominal: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRegion {
    /// Radial band around the catcher base, metres.
    pub radius: [f64; 2],
    /// Angular band around the catcher base, degrees from +x.
    pub angle_deg: [f64; 2],
    pub min_height: f64,
    pub max_retries: u32,
}

/// Orthographic camera frustum in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewBox {
    pub x: [f64; 2],
    pub z: [f64; 2],
}

impl ViewBox {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.z[0] && p[1] <= self.z[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Randomization {
    pub enabled: bool,
    pub mass: [f64; 2],
    pub stiffness_scale: [f64; 2],
    pub damping_scale: [f64; 2],
    pub restitution_offset: [f64; 2],
    pub friction_offset: [f64; 2],
    pub obs_noise_std: f64,
    pub obs_bias_std: f64,
    pub action_noise_std: f64,
    pub action_bias_std: f64,
    pub background_prob: f64,
    pub background_noise_std: f64,
    /// Uniform jitter added to the nominal joint angles at reset, rad.
    pub pose_jitter: f64,
    /// Used for mass when randomization is off.
    pub nominal_mass: f64,
    /// Used for color when randomization is off.
    pub nominal_color: [f64; 3],
}

impl Default for Randomization {
    fn default() -> Self {
        Self {
            enabled: true,
            mass: [0.3, 0.5],
            stiffness_scale: [0.75, 1.5],
            damping_scale: [0.75, 1.5],
            restitution_offset: [-0.04, 0.04],
            friction_offset: [-0.04, 0.04],
            obs_noise_std: 0.02,
            obs_bias_std: 0.001,
            action_noise_std: 0.002,
            action_bias_std: 0.0001,
            background_prob: 0.3,
            background_noise_std: 1.0,
            pose_jitter: 0.05,
            nominal_mass: 0.4,
            nominal_color: [0.85, 0.25, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureThresholds {
    pub object_min_height: f64,
    pub goal_deviation: f64,
    pub hand_min_distance: f64,
    pub link_clearance: f64,
}

impl Default for FailureThresholds {
    fn default() -> Self {
        Self {
            object_min_height: 0.1,
            goal_deviation: 0.4,
            hand_min_distance: 0.1,
            link_clearance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub gravity: f64,
    pub physics_dt: f64,
    pub decimation: u32,
    pub max_steps: u32,
    pub link_lengths: [f64; 3],
    pub thrower: ArmConfig,
    pub catcher: ArmConfig,
    pub gripper_range: [f64; 2],
    /// Arm velocity command at action = ±1, rad/s.
    pub arm_velocity_scale: f64,
    pub arm_velocity_limit: f64,
    pub gripper_velocity_limit: f64,
    pub arm_torque_limit: f64,
    pub gripper_torque_limit: f64,
    pub arm_stiffness: f64,
    pub arm_damping: f64,
    pub gripper_stiffness: f64,
    pub gripper_damping: f64,
    /// Aperture above which a held object is let go.
    pub release_threshold: f64,
    /// Aperture below which the gripper counts as closed for a catch.
    pub close_threshold: f64,
    pub catch_radius: f64,
    pub base_restitution: f64,
    pub base_friction: f64,
    pub target: TargetRegion,
    pub view: ViewBox,
    pub failure: FailureThresholds,
    pub randomization: Randomization,
    pub object_set: ObjectSetKind,
    /// Restrict episodes to one named shape of the object set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
}

const THROWER_NOMINAL_PALM: [f64; 2] = [0.30, 0.78];
const THROWER_NOMINAL_ANGLE_DEG: f64 = 45.0;
const CATCHER_NOMINAL_ANGLE_DEG: f64 = 160.0;

impl Default for WorldConfig {
    fn default() -> Self {
        let links = [0.30, 0.25, 0.10];
        let thrower_base = [0.0, 0.5];
        let catcher_base = [1.2, 0.5];
        let target = TargetRegion {
            radius: [0.35, 0.55],
            angle_deg: [95.0, 155.0],
            min_height: 0.6,
            max_retries: 64,
        };
        let mid_r = 0.5 * (target.radius[0] + target.radius[1]);
        let mid_a = (0.5 * (target.angle_deg[0] + target.angle_deg[1])).to_radians();
        let catcher_palm = [
            catcher_base[0] + mid_r * mid_a.cos(),
            catcher_base[1] + mid_r * mid_a.sin(),
        ];
        let thrower_nominal = ik_palm(
            thrower_base,
            links,
            THROWER_NOMINAL_PALM,
            THROWER_NOMINAL_ANGLE_DEG.to_radians(),
            -1.0,
        )
        .expect("nominal thrower pose is reachable");
        let catcher_nominal = ik_palm(
            catcher_base,
            links,
            catcher_palm,
            CATCHER_NOMINAL_ANGLE_DEG.to_radians(),
            1.0,
        )
        .expect("nominal catcher pose is reachable");
        Self {
            gravity: 9.81,
            physics_dt: 1.0 / 120.0,
            decimation: 2,
            max_steps: 180,
            link_lengths: links,
            thrower: ArmConfig {
                base: thrower_base,
                joint_lower: [-1.5, -2.8, -2.5],
                joint_upper: [3.0, 2.8, 2.5],
                nominal: thrower_nominal,
            },
            catcher: ArmConfig {
                base: catcher_base,
                joint_lower: [PI - 3.0, -2.8, -2.5],
                joint_upper: [PI + 1.5, 2.8, 2.5],
                nominal: catcher_nominal,
            },
            gripper_range: [0.0, 0.06],
            arm_velocity_scale: 8.0,
            arm_velocity_limit: 10.0,
            gripper_velocity_limit: 2.0,
            arm_torque_limit: 400.0,
            gripper_torque_limit: 50.0,
            arm_stiffness: 0.0,
            arm_damping: 80.0,
            gripper_stiffness: 2000.0,
            gripper_damping: 80.0,
            release_threshold: 0.005,
            close_threshold: 0.005,
            catch_radius: 0.05,
            base_restitution: 0.2,
            base_friction: 0.3,
            target,
            view: ViewBox {
                x: [-0.3, 1.5],
                z: [0.0, 1.6],
            },
            failure: FailureThresholds::default(),
            randomization: Randomization::default(),
            object_set: ObjectSetKind::Train,
            object: None,
        }
    }
}

fn ordered(name: &str, r: [f64; 2]) -> Result<()> {
    if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
        Ok(())
    } else {
        Err(Error::config(format!("{name}: range {r:?} is not ordered")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive, got {v}")))
    }
}

impl WorldConfig {
    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.decimation as f64
    }

    pub fn episode_seconds(&self) -> f64 {
        self.control_dt() * self.max_steps as f64
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        positive("gravity", self.gravity)?;
        positive("physics_dt", self.physics_dt)?;
        if self.decimation == 0 || self.max_steps == 0 {
            return Err(Error::config("decimation and max_steps must be at least 1"));
        }
        for (i, l) in self.link_lengths.iter().enumerate() {
            positive(["link 0", "link 1", "link 2"][i], *l)?;
        }
        for (name, arm) in [("thrower", &self.thrower), ("catcher", &self.catcher)] {
            for j in 0..3 {
                ordered(name, [arm.joint_lower[j], arm.joint_upper[j]])?;
                if arm.nominal[j] < arm.joint_lower[j] || arm.nominal[j] > arm.joint_upper[j] {
                    return Err(Error::config(format!("{name} nominal joint {j} outside limits")));
                }
            }
        }
        ordered("gripper_range", self.gripper_range)?;
        for (name, v) in [
            ("arm_velocity_scale", self.arm_velocity_scale),
            ("arm_velocity_limit", self.arm_velocity_limit),
            ("gripper_velocity_limit", self.gripper_velocity_limit),
            ("arm_torque_limit", self.arm_torque_limit),
            ("gripper_torque_limit", self.gripper_torque_limit),
            ("arm_damping", self.arm_damping),
            ("gripper_stiffness", self.gripper_stiffness),
            ("catch_radius", self.catch_radius),
            ("release_threshold", self.release_threshold),
            ("close_threshold", self.close_threshold),
        ] {
            positive(name, v)?;
        }
        if self.arm_stiffness < 0.0 || self.gripper_damping < 0.0 {
            return Err(Error::config("gains must be non-negative"));
        }
        ordered("target.radius", self.target.radius)?;
        ordered("target.angle_deg", self.target.angle_deg)?;
        ordered("view.x", self.view.x)?;
        ordered("view.z", self.view.z)?;
        let r = &self.randomization;
        for (name, range) in [
            ("mass", r.mass),
            ("stiffness_scale", r.stiffness_scale),
            ("damping_scale", r.damping_scale),
            ("restitution_offset", r.restitution_offset),
            ("friction_offset", r.friction_offset),
        ] {
            ordered(name, range)?;
        }
        positive("mass", r.mass[0])?;
        positive("nominal_mass", r.nominal_mass)?;
        if !(0.0..=1.0).contains(&r.background_prob) {
            return Err(Error::config("background_prob must lie in [0, 1]"));
        }
        let gap = self.catcher.base[0] - self.thrower.base[0];
        if gap <= 0.0 {
            return Err(Error::config("catcher base must lie to the right of the thrower base"));
        }
        let reach: f64 = self.link_lengths.iter().sum();
        if 2.0 * reach <= gap {
            return Err(Error::config("arm workspaces do not overlap"));
        }
        Ok(())
    }
}
