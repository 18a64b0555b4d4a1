use rand::Rng;
use rand_distr::StandardNormal;

use super::DenseNetwork;
use crate::error::{check_dim, Error, Result};
use crate::scalar::ln_two_pi;
use crate::Scalar;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Diagonal Gaussian policy with a state-independent learnable log-σ.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy<T> {
    pub mean: DenseNetwork<T>,
    log_std: Vec<T>,
}

impl<T: Scalar> GaussianPolicy<T> {
    pub fn new(mean: DenseNetwork<T>, log_std: Vec<T>) -> Result<Self> {
        check_dim("policy log-std", mean.output_dim(), log_std.len())?;
        let mut p = GaussianPolicy { mean, log_std };
        p.clamp_log_std();
        Ok(p)
    }

    pub fn obs_dim(&self) -> usize {
        self.mean.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn log_std(&self) -> &[T] {
        &self.log_std
    }

    pub fn set_log_std(&mut self, log_std: &[T]) -> Result<()> {
        check_dim("policy log-std", self.log_std.len(), log_std.len())?;
        self.log_std.copy_from_slice(log_std);
        self.clamp_log_std();
        Ok(())
    }

    pub fn std(&self) -> Vec<T> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    /// Projects log-σ back into `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub fn clamp_log_std(&mut self) {
        let (lo, hi) = (T::of(LOG_STD_MIN), T::of(LOG_STD_MAX));
        for l in &mut self.log_std {
            *l = if l.is_nan() { lo } else { l.max(lo).min(hi) };
        }
    }

    pub fn mean_action(&self, obs: &[T]) -> Result<Vec<T>> {
        self.mean.forward(obs)
    }

    /// Draws `a = μ + σ ⊙ z` with `z ~ N(0, I)` and returns it with its log-density.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[T], rng: &mut R) -> Result<(Vec<T>, T)> {
        let mu = self.mean.forward(obs)?;
        let action: Vec<T> = mu
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &l)| {
                let z: f64 = rng.sample(StandardNormal);
                m + l.exp() * T::of(z)
            })
            .collect();
        let lp = diag_gaussian_log_prob(&mu, &self.log_std, &action);
        Ok((action, lp))
    }

    pub fn log_prob(&self, obs: &[T], action: &[T]) -> Result<T> {
        check_dim("policy action", self.action_dim(), action.len())?;
        let mu = self.mean.forward(obs)?;
        Ok(diag_gaussian_log_prob(&mu, &self.log_std, action))
    }

    /// Network blocks followed by the log-σ block.
    pub fn param_shapes(&self) -> Vec<usize> {
        let mut s = self.mean.param_shapes();
        s.push(self.log_std.len());
        s
    }

    pub fn param_blocks(&self) -> Vec<&[T]> {
        let mut b = self.mean.param_blocks();
        b.push(&self.log_std);
        b
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [T]> {
        let mut b = self.mean.param_blocks_mut();
        b.push(&mut self.log_std);
        b
    }
}

pub fn diag_gaussian_log_prob<T: Scalar>(mu: &[T], log_std: &[T], action: &[T]) -> T {
    let half = T::of(0.5);
    mu.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &l), &a)| {
            let u = (a - m) / l.exp();
            -half * u * u - l - half * ln_two_pi::<T>()
        })
        .sum()
}

/// Log-density with its gradients with respect to `μ` and `log σ`.
pub fn diag_gaussian_log_prob_grad<T: Scalar>(mu: &[T], log_std: &[T], action: &[T]) -> (T, Vec<T>, Vec<T>) {
    let lp = diag_gaussian_log_prob(mu, log_std, action);
    let mut d_mu = Vec::with_capacity(mu.len());
    let mut d_ls = Vec::with_capacity(mu.len());
    for ((&m, &l), &a) in mu.iter().zip(log_std).zip(action) {
        let s = l.exp();
        let u = (a - m) / s;
        d_mu.push(u / s);
        d_ls.push(u * u - T::one());
    }
    (lp, d_mu, d_ls)
}

pub fn diag_gaussian_entropy<T: Scalar>(log_std: &[T]) -> T {
    let c = T::of(0.5) * (ln_two_pi::<T>() + T::one());
    log_std.iter().map(|&l| l + c).sum()
}

/// `D_KL(N(μ*, σ*²) ‖ N(μ, σ²))`, summed over independent dimensions:
/// `Σ log(σ/σ*) + (σ*² + (μ* − μ)²) / (2σ²) − ½`.
pub fn gaussian_kl<T: Scalar>(mu_ref: &[T], sigma_ref: &[T], mu: &[T], sigma: &[T]) -> Result<T> {
    let n = mu_ref.len();
    check_dim("kl reference std", n, sigma_ref.len())?;
    check_dim("kl mean", n, mu.len())?;
    check_dim("kl std", n, sigma.len())?;
    if sigma_ref.iter().chain(sigma).any(|&s| !(s > T::zero())) {
        return Err(Error::contract("gaussian_kl requires strictly positive standard deviations"));
    }
    let half = T::of(0.5);
    Ok((0..n)
        .map(|i| {
            let d = mu_ref[i] - mu[i];
            (sigma[i] / sigma_ref[i]).ln() + (sigma_ref[i] * sigma_ref[i] + d * d) / (T::of(2.0) * sigma[i] * sigma[i]) - half
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlGrad<T> {
    pub value: T,
    pub d_mu: Vec<T>,
    pub d_log_std: Vec<T>,
}

/// KL of [`gaussian_kl`] with gradients with respect to the second
/// distribution's `μ` and `log σ`; the reference side receives none.
pub fn gaussian_kl_grad<T: Scalar>(mu_ref: &[T], sigma_ref: &[T], mu: &[T], log_std: &[T]) -> Result<KlGrad<T>> {
    let sigma: Vec<T> = log_std.iter().map(|l| l.exp()).collect();
    let value = gaussian_kl(mu_ref, sigma_ref, mu, &sigma)?;
    let mut d_mu = Vec::with_capacity(mu.len());
    let mut d_log_std = Vec::with_capacity(mu.len());
    for i in 0..mu.len() {
        let var = sigma[i] * sigma[i];
        let d = mu[i] - mu_ref[i];
        d_mu.push(d / var);
        d_log_std.push(T::one() - (sigma_ref[i] * sigma_ref[i] + d * d) / var);
    }
    Ok(KlGrad { value, d_mu, d_log_std })
}
