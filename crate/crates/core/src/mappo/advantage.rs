//! Generalized advantage estimation and the hybrid advantage.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Result};
use crate::scalar::Scalar;
use crate::seeding::Rng;

/// Backward GAE recursion over one environment's sequence.
///
/// `dones[t]` marks that the transition at `t` ended its episode, so neither
/// value nor advantage flows back across it. `bootstrap` is `V(s_T)` for the
/// state after the last transition and is ignored when that transition is
/// terminal. Returns `(advantages, returns)` with `returns = A + V`.
pub fn compute_gae<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    bootstrap: T,
    gamma: T,
    lambda: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let n = rewards.len();
    check_dim("gae values", n, values.len())?;
    check_dim("gae dones", n, dones.len())?;
    let mut adv = vec![T::zero(); n];
    let mut next_value = bootstrap;
    let mut next_adv = T::zero();
    for t in (0..n).rev() {
        let live = if dones[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    Ok((adv, returns))
}

/// `min(V(s_{t+1}) − V(s_t), 0)`, with `V(s_{t+1}) = 0` after a terminal step.
pub fn internal_advantage<T: Scalar>(value: T, next_value: T, done: bool) -> T {
    let next = if done { T::zero() } else { next_value };
    (next - value).min(T::zero())
}

/// Per-transition internal advantages for one sequence; `bootstrap` plays
/// the role of `V(s_T)`.
pub fn internal_advantages<T: Scalar>(values: &[T], dones: &[bool], bootstrap: T) -> Vec<T> {
    (0..values.len())
        .map(|t| {
            let next = if t + 1 < values.len() { values[t + 1] } else { bootstrap };
            internal_advantage(values[t], next, dones[t])
        })
        .collect()
}

/// `A_GAE + β₁·A_I + β₂·A_N` with `A_N ~ N(0, 1)` drawn per element from
/// `rng`. No draws are made when `β₂ = 0`.
pub fn hybrid_advantage<T: Scalar>(gae: &[T], internal: &[T], beta1: T, beta2: T, rng: &mut Rng) -> Result<Vec<T>> {
    check_dim("internal advantage", gae.len(), internal.len())?;
    Ok(gae
        .iter()
        .zip(internal)
        .map(|(&a, &i)| {
            let mut h = a + beta1 * i;
            if beta2 != T::zero() {
                let z: f64 = rng.sample(StandardNormal);
                h = h + beta2 * T::of(z);
            }
            h
        })
        .collect())
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
pub fn normalize<T: Scalar>(values: &mut [T]) {
    if values.is_empty() {
        return;
    }
    let n = T::of(values.len() as f64);
    let mean = values.iter().fold(T::zero(), |s, &v| s + v) / n;
    let var = values.iter().fold(T::zero(), |s, &v| s + (v - mean) * (v - mean)) / n;
    let scale = T::one() / (var.sqrt() + T::of(1e-8));
    for v in values.iter_mut() {
        *v = (*v - mean) * scale;
    }
}
