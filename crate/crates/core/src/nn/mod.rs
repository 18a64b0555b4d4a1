//! Dense feedforward networks with hand-written reverse-mode gradients, Adam,
//! and diagonal-Gaussian policy math.

mod activation;
mod adam;
pub mod checkpoint;
mod gaussian;
mod grads;
mod network;

pub use activation::Activation;
pub use adam::{AdamConfig, AdamState};
pub use gaussian::{
    diag_gaussian_entropy, diag_gaussian_log_prob, diag_gaussian_log_prob_grad, gaussian_kl,
    gaussian_kl_grad, GaussianPolicy, KlGrad, LOG_STD_MAX, LOG_STD_MIN,
};
pub use grads::Grads;
pub use network::{Dense, DenseNetwork, Trace};
