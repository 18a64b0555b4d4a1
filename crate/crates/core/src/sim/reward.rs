use serde::{Deserialize, Serialize};

/// Weights of the shared reward, in the order of [`RewardTerms`] fields.
pub const REWARD_WEIGHTS: RewardTerms = RewardTerms {
    distance: 4.0,
    object: 0.5,
    contact: 1.0,
    action: 0.0001,
    hand: 1.0,
};

/// Decay rate inside the exponential distance kernels, 1/m.
pub const DISTANCE_DECAY: f64 = 10.0;

/// Unweighted reward terms.
///
/// `action` is the negative instantaneous joint power norm and `hand` the
/// negative hand-proximity kernel, so both enter with positive weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub distance: f64,
    pub object: f64,
    pub contact: f64,
    pub action: f64,
    pub hand: f64,
}

impl RewardTerms {
    pub fn from_distances(l_target: f64, l_obj: f64, l_hand: f64, contact: bool, torque: &[f64], velocity: &[f64]) -> Self {
        Self {
            distance: (-DISTANCE_DECAY * l_target).exp(),
            object: (-DISTANCE_DECAY * l_obj).exp(),
            contact: if contact { 1.0 } else { 0.0 },
            action: action_penalty(torque, velocity),
            hand: -(-DISTANCE_DECAY * l_hand).exp(),
        }
    }

    pub fn total(&self) -> f64 {
        let w = &REWARD_WEIGHTS;
        w.distance * self.distance + w.object * self.object + w.contact * self.contact + w.action * self.action + w.hand * self.hand
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.distance += other.distance;
        self.object += other.object;
        self.contact += other.contact;
        self.action += other.action;
        self.hand += other.hand;
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            distance: self.distance * k,
            object: self.object * k,
            contact: self.contact * k,
            action: self.action * k,
            hand: self.hand * k,
        }
    }
}

/// `−sqrt(Σ (τ_j q̇_j)²)` over every actuated joint.
pub fn action_penalty(torque: &[f64], velocity: &[f64]) -> f64 {
    debug_assert_eq!(torque.len(), velocity.len());
    -torque.iter().zip(velocity).map(|(t, v)| (t * v) * (t * v)).sum::<f64>().sqrt()
}
