//! Clipped-surrogate actor objective, the KL-regularized thrower objective,
//! critic regression, and one minibatch update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{diag_gaussian_entropy, diag_gaussian_log_prob_grad, gaussian_kl_grad, Grads};
use crate::{Adam, Network, Policy};

/// Loss coefficients for one agent's update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoCoefficients {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Weight of the KL term; zero for agents without a reference.
    pub lambda_reg: f64,
    pub max_grad_norm: f64,
}

/// `min(ρÂ, clip(ρ, 1−ε, 1+ε)Â)` and its derivative with respect to the new
/// log-probability. The third value reports whether the clipped branch is
/// active (zero gradient).
pub fn clipped_surrogate(logp_new: f64, logp_old: f64, advantage: f64, clip: f64) -> (f64, f64, bool) {
    let ratio = (logp_new - logp_old).exp();
    let clipped_ratio = ratio.clamp(1.0 - clip, 1.0 + clip);
    let unclipped = ratio * advantage;
    let clipped = clipped_ratio * advantage;
    if clipped < unclipped {
        (clipped, 0.0, true)
    } else {
        (unclipped, unclipped, false)
    }
}

/// One actor sample. `reference` is the frozen human mean `μ*` over the
/// first `reference.len()` action dimensions.
#[derive(Debug, Clone, Copy)]
pub struct ActorSample<'a> {
    pub obs: &'a [f64],
    pub action: &'a [f64],
    pub logp_old: f64,
    pub advantage: f64,
    pub reference: Option<&'a [f64]>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActorStats {
    pub surrogate: f64,
    pub kl: f64,
    pub entropy: f64,
    pub objective: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
}

/// Value of the objective that is maximized,
/// `J = (1−λ)(mean surrogate + c_H·H) − λ·mean KL(π* ‖ π)`,
/// and (when `grads` is given) the gradient of `−J` accumulated into it.
pub fn actor_objective(
    policy: &Policy,
    batch: &[ActorSample<'_>],
    coef: &PpoCoefficients,
    reference_sigma: f64,
    grads: Option<&mut Grads<f64>>,
) -> Result<ActorStats> {
    if batch.is_empty() {
        return Err(Error::contract("empty minibatch"));
    }
    let lambda = coef.lambda_reg;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::contract(format!("lambda_reg must lie in [0, 1], got {lambda}")));
    }
    let n = batch.len() as f64;
    let log_std = policy.log_std();
    let mut stats = ActorStats::default();
    let use_kl = lambda != 0.0;
    let want_grads = grads.is_some();
    let mut net_grads = if want_grads { policy.mean.zero_grads() } else { Grads { blocks: Vec::new() } };
    let mut ls_grad = vec![0.0; log_std.len()];
    for s in batch {
        let trace = policy.mean.forward_recorded(s.obs)?;
        let mu = trace.output();
        let (lp, d_mu_lp, d_ls_lp) = diag_gaussian_log_prob_grad(mu, log_std, s.action);
        let (surr, d_surr, clipped) = clipped_surrogate(lp, s.logp_old, s.advantage, coef.clip);
        stats.surrogate += surr;
        stats.mean_ratio += (lp - s.logp_old).exp();
        stats.clip_fraction += clipped as u8 as f64;
        let kl = match (use_kl, s.reference) {
            (true, Some(mu_ref)) => {
                let k = mu_ref.len();
                let sigma_ref = vec![reference_sigma; k];
                Some(gaussian_kl_grad(mu_ref, &sigma_ref, &mu[..k], &log_std[..k])?)
            }
            _ => None,
        };
        if let Some(k) = &kl {
            stats.kl += k.value;
        }
        if want_grads {
            let w = (1.0 - lambda) / n;
            let mut up: Vec<f64> = d_mu_lp.iter().map(|d| -w * d_surr * d).collect();
            for (a, d) in ls_grad.iter_mut().zip(&d_ls_lp) {
                *a -= w * d_surr * d;
            }
            if let Some(k) = &kl {
                for i in 0..k.d_mu.len() {
                    up[i] += lambda / n * k.d_mu[i];
                    ls_grad[i] += lambda / n * k.d_log_std[i];
                }
            }
            policy.mean.backward_into(&trace, &up, &mut net_grads)?;
        }
    }
    stats.entropy = diag_gaussian_entropy(log_std);
    if let Some(g) = grads {
        if coef.entropy_coef != 0.0 {
            for a in ls_grad.iter_mut() {
                *a -= (1.0 - lambda) * coef.entropy_coef;
            }
        }
        let k = net_grads.blocks.len();
        for (dst, src) in g.blocks.iter_mut().zip(net_grads.blocks) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }
        for (a, b) in g.blocks[k].iter_mut().zip(&ls_grad) {
            *a += b;
        }
    }
    stats.surrogate /= n;
    stats.kl /= n;
    stats.mean_ratio /= n;
    stats.clip_fraction /= n;
    stats.objective = if use_kl {
        (1.0 - lambda) * (stats.surrogate + coef.entropy_coef * stats.entropy) - lambda * stats.kl
    } else {
        stats.surrogate + coef.entropy_coef * stats.entropy
    };
    Ok(stats)
}

/// `c_V · mean (V(s) − R)²`, with its gradient accumulated into `grads`.
pub fn critic_loss(
    critic: &Network,
    states: &[&[f64]],
    returns: &[f64],
    value_coef: f64,
    mut grads: Option<&mut Grads<f64>>,
) -> Result<f64> {
    let n = states.len() as f64;
    let mut loss = 0.0;
    for (s, &r) in states.iter().zip(returns) {
        let trace = critic.forward_recorded(s)?;
        let e = trace.output()[0] - r;
        loss += value_coef * e * e / n;
        if let Some(g) = grads.as_deref_mut() {
            critic.backward_into(&trace, &[2.0 * value_coef * e / n], g)?;
        }
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub actor: ActorStats,
    pub value_loss: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub skipped: bool,
}

/// One Adam step for an actor and its critic on a minibatch. Gradients are
/// norm-clipped separately; a non-finite loss or gradient skips the step.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    policy: &mut Policy,
    critic: &mut Network,
    actor_opt: &mut Adam,
    critic_opt: &mut Adam,
    batch: &[ActorSample<'_>],
    states: &[&[f64]],
    returns: &[f64],
    coef: &PpoCoefficients,
    reference_sigma: f64,
) -> Result<UpdateStats> {
    let mut ga = Grads::zeros(&policy.param_shapes());
    let actor = actor_objective(policy, batch, coef, reference_sigma, Some(&mut ga))?;
    let mut gc = critic.zero_grads();
    let value_loss = critic_loss(critic, states, returns, coef.value_coef, Some(&mut gc))?;
    let finite = actor.objective.is_finite() && value_loss.is_finite() && ga.all_finite() && gc.all_finite();
    if !finite {
        return Ok(UpdateStats {
            actor,
            value_loss,
            skipped: true,
            ..Default::default()
        });
    }
    let actor_grad_norm = ga.clip_norm(coef.max_grad_norm);
    let critic_grad_norm = gc.clip_norm(coef.max_grad_norm);
    actor_opt.step(policy.param_blocks_mut(), &ga)?;
    policy.clamp_log_std();
    critic_opt.step(critic.param_blocks_mut(), &gc)?;
    Ok(UpdateStats {
        actor,
        value_loss,
        actor_grad_norm,
        critic_grad_norm,
        skipped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_arithmetic() {
        let (v, d, c) = clipped_surrogate(2f64.ln(), 0.0, 1.0, 0.2);
        assert!((v - 1.2).abs() < 1e-12 && d == 0.0 && c);
        let (v, d, c) = clipped_surrogate(0.0, 0.0, -3.0, 0.2);
        assert_eq!((v, d, c), (-3.0, -3.0, false));
        // negative advantage with a small ratio is clipped from below
        let (v, _, c) = clipped_surrogate(0.5f64.ln(), 0.0, -1.0, 0.2);
        assert!((v + 0.8).abs() < 1e-12 && c);
    }
}
