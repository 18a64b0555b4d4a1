//! Planar two-arm throw-and-catch: simulator, synthetic perception, scripted
//! demonstrations, behavior cloning, and human-regularized multi-agent PPO.
//!
//! The numeric kernels (`nn`, kinematics, ballistics, advantage estimation) are
//! generic over [`Scalar`]; the pipeline itself runs in `f64` through the
//! aliases below.

pub mod demos;
pub mod env;
pub mod error;
pub mod eval;
pub mod mappo;
pub mod nn;
pub mod project;
pub mod scalar;
pub mod seeding;
pub mod sim;
pub mod vision;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Network = nn::DenseNetwork<f64>;
pub type Policy = nn::GaussianPolicy<f64>;
pub type Adam = nn::AdamState<f64>;
pub type Gradients = nn::Grads<f64>;
