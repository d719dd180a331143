use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, z: T) -> T {
        match self {
            Self::Relu => z.max(T::zero()),
            Self::Sigmoid => T::one() / (T::one() + (-z).exp()),
            Self::Linear => z,
        }
    }

    /// Derivative with respect to the pre-activation `z`. ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative<T: Real>(self, z: T) -> T {
        match self {
            Self::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Sigmoid => {
                let s = self.apply(z);
                s * (T::one() - s)
            }
            Self::Linear => T::one(),
        }
    }

    pub fn apply_all<T: Real>(self, zs: &[T]) -> Vec<T> {
        zs.iter().map(|&z| self.apply(z)).collect()
    }
}
