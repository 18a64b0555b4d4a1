//! Centralized-critic multi-agent PPO with hybrid advantages and a KL pull
//! toward the behavior-cloned thrower.

pub mod advantage;
pub mod config;
pub mod ppo;
pub mod rollout;
pub mod team;
pub mod trainer;

pub use advantage::{compute_gae, hybrid_advantage, internal_advantage, internal_advantages, normalize};
pub use config::{Ablation, TrainerConfig};
pub use ppo::{actor_objective, clipped_surrogate, critic_loss, ppo_update, ActorSample, ActorStats, PpoCoefficients, UpdateStats};
pub use rollout::{collect_rollouts, AgentTrajectory, EnvBatch, EpisodeTally, RolloutBuffer};
pub use team::{actor_from_bundle, Agent, Controller, EpisodeDriver, Role, Team};
pub use trainer::{process_advantages, train, update_agent, AgentMetrics, IterationMetrics, Trainer};
