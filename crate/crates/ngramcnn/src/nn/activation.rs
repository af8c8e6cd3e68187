//! Elementwise activations whose derivatives are recoverable from their
//! own outputs, which lets the backward pass run without stashing
//! pre-activation values.

use serde::{Deserialize, Serialize};

use super::tensor::Scalar;

/// Activation for convolution and dense layers.
///
/// The probability output unit (sigmoid or softplus) is handled by the
/// output layer itself, not by this enum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Softsign,
}

impl Activation {
    #[inline]
    pub fn apply<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > F::zero() {
                    x
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Softsign => x / (F::one() + x.abs()),
        }
    }

    /// Derivative dy/dx expressed in terms of the output y.
    ///
    /// relu: 1 for y > 0, else 0. tanh: 1 - y^2. softsign has
    /// y = x/(1+|x|), so 1/(1+|x|) = 1-|y| and dy/dx = (1-|y|)^2.
    #[inline]
    pub fn derivative_from_output<F: Scalar>(self, y: F) -> F {
        match self {
            Activation::Identity => F::one(),
            Activation::Relu => {
                if y > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::Tanh => F::one() - y * y,
            Activation::Softsign => {
                let t = F::one() - y.abs();
                t * t
            }
        }
    }

    pub const ALL: [Activation; 4] = [
        Activation::Identity,
        Activation::Relu,
        Activation::Tanh,
        Activation::Softsign,
    ];
}
