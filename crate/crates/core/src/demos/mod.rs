//! Scripted demonstrations and the behavior-cloned human policy.

pub mod collect;
pub mod dataset;
pub mod human;
pub mod planner;
pub mod scripted;

pub use collect::{collect_demos, CollectConfig, CollectStats};
pub use dataset::{load_demos, save_demos, DemoRecord};
pub use human::{action_mse, bc_loss_and_grad, train_human_policy, BcConfig, BcReport, BcSample, HumanPolicy};
pub use planner::{PlannerConfig, ThrowPlan, ThrowPlanner};
pub use scripted::{InterceptingCatcher, ScriptedThrower};
