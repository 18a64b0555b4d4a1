//! Planar two-arm throw-and-catch simulator.

pub mod ballistics;
pub mod config;
pub mod export;
pub mod kinematics;
pub mod objects;
pub mod observation;
pub mod reward;
pub mod world;

pub use config::{ObjectSetKind, WorldConfig};
pub use objects::{NamedShape, ObjectSet, Shape};
pub use observation::{build_observations, human_input, Observations};
pub use reward::RewardTerms;
pub use world::{check_failure, compute_reward, Attachment, FailureCause, StepOutcome, World, WorldState, CATCHER, THROWER};
