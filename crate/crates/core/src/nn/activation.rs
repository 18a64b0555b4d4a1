use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    /// ELU with alpha = 1.
    Elu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Linear => x,
            Activation::Elu => {
                if x > T::zero() {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T, y: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Elu => {
                if z > T::zero() {
                    T::one()
                } else {
                    y + T::one()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Elu => 1,
            Activation::Tanh => 2,
            Activation::Sigmoid => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Linear,
            1 => Activation::Elu,
            2 => Activation::Tanh,
            3 => Activation::Sigmoid,
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        for act in [Activation::Linear, Activation::Elu, Activation::Tanh, Activation::Sigmoid] {
            for &z in &[-2.3f64, -0.4, 0.3, 1.7] {
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                let an = act.derivative(z, act.apply(z));
                assert!((fd - an).abs() < 1e-8, "{act:?} at {z}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn elu_is_continuous_at_zero() {
        assert_eq!(Activation::Elu.apply(0.0f64), 0.0);
        assert!(Activation::Elu.apply(-1e-12f64).abs() < 1e-11);
    }
}
