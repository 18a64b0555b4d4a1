use serde::{Deserialize, Serialize};

use super::Grads;
use crate::error::{check_dim, Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Default::default() }
    }
}

/// Adam moments for one model; block shapes mirror the model's parameter blocks.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shapes: &[usize], config: AdamConfig) -> Self {
        AdamState {
            config,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected Adam update. A non-finite gradient rejects
    /// the whole update and leaves both parameters and moments untouched.
    pub fn step(&mut self, params: Vec<&mut [T]>, grads: &Grads<T>) -> Result<()> {
        check_dim("adam parameter blocks", self.m.len(), params.len())?;
        check_dim("adam gradient blocks", self.m.len(), grads.blocks.len())?;
        for ((p, g), m) in params.iter().zip(&grads.blocks).zip(&self.m) {
            check_dim("adam block", m.len(), p.len())?;
            check_dim("adam block", m.len(), g.len())?;
        }
        if !grads.all_finite() {
            return Err(Error::Numeric("non-finite gradient rejected by adam".into()));
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let t = self.step as i32;
        let bc1 = T::one() - T::of(c.beta1.powi(t));
        let bc2 = T::one() - T::of(c.beta2.powi(t));
        let lr = T::of(c.lr);
        let eps = T::of(c.eps);
        for (((p, g), m), v) in params.into_iter().zip(&grads.blocks).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.3, -1.2, 5.0];
        let mut adam = AdamState::<f64>::new(&[3], AdamConfig::default());
        for _ in 0..5 {
            adam.step(vec![&mut p], &Grads::zeros(&[3])).unwrap();
        }
        assert_eq!(p, vec![0.3, -1.2, 5.0]);
        assert_eq!(adam.steps_taken(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m = 0.1, v = 0.001; bias correction gives m_hat = v_hat = 1, so the
        // update is lr / (1 + eps).
        let mut p = vec![2.0];
        let mut adam = AdamState::<f64>::new(&[1], AdamConfig::with_lr(1e-4));
        adam.step(vec![&mut p], &Grads { blocks: vec![vec![1.0]] }).unwrap();
        let expected = 2.0 - 1e-4 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((2.0 - p[0] - 1e-4).abs() < 1e-11);
    }

    #[test]
    fn symmetric_params_get_identical_updates() {
        let mut p = vec![0.5, 0.5];
        let mut adam = AdamState::<f64>::new(&[2], AdamConfig::default());
        for k in 0..10 {
            let g = 0.1 * k as f64 - 0.3;
            adam.step(vec![&mut p], &Grads { blocks: vec![vec![g, g]] }).unwrap();
        }
        assert_eq!(p[0].to_bits(), p[1].to_bits());
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = vec![1.0, 1.0];
        let mut adam = AdamState::<f64>::new(&[2], AdamConfig::default());
        let err = adam.step(vec![&mut p], &Grads { blocks: vec![vec![f64::NAN, 1.0]] });
        assert!(matches!(err, Err(Error::Numeric(_))));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(adam.steps_taken(), 0);
    }
}
