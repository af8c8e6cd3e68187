//! Adam optimizer step with bias correction.

use super::tensor::{Parameter, Scalar};

/// Hyperparameters; `Default` gives the standard published values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update from `param.grad`, in place.
///
/// m and v are the exponential moment estimates; both are corrected by
/// 1/(1-beta^t) before the update, with t the incremented step count.
/// The gradient itself is left untouched.
pub fn adam_step<F: Scalar>(param: &mut Parameter<F>, hp: &AdamParams) {
    param.step_count += 1;
    let t = param.step_count as i32;
    let b1 = F::from_f64(hp.beta1);
    let b2 = F::from_f64(hp.beta2);
    let one = F::one();
    let corr1 = one - F::from_f64(hp.beta1.powi(t));
    let corr2 = one - F::from_f64(hp.beta2.powi(t));
    let lr = F::from_f64(hp.lr);
    let eps = F::from_f64(hp.eps);

    for i in 0..param.value.len() {
        let g = param.grad.data()[i];
        let m = b1 * param.adam_m.data()[i] + (one - b1) * g;
        let v = b2 * param.adam_v.data()[i] + (one - b2) * g * g;
        param.adam_m.data_mut()[i] = m;
        param.adam_v.data_mut()[i] = v;
        let m_hat = m / corr1;
        let v_hat = v / corr2;
        param.value.data_mut()[i] =
            param.value.data()[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn param_with_grad(value: f64, grad: f64) -> Parameter<f64> {
        let mut p = Parameter::new("w", Tensor::scalar(value));
        p.grad.data_mut()[0] = grad;
        p
    }

    /// First step with unit gradient: both corrected moments equal 1, so
    /// the update is -lr/(1+eps), within 1e-9 of -0.001 at defaults.
    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = param_with_grad(0.0, 1.0);
        adam_step(&mut p, &AdamParams::default());
        assert!((p.value.data()[0] + 0.001).abs() < 1e-9);
        assert_eq!(p.step_count, 1);
    }

    #[test]
    fn zero_gradient_with_zero_moments_leaves_value_unchanged() {
        let mut p = param_with_grad(0.75, 0.0);
        adam_step(&mut p, &AdamParams::default());
        assert_eq!(p.value.data()[0], 0.75);
    }

    #[test]
    fn identical_state_yields_identical_updates() {
        let mut a = param_with_grad(0.2, -0.4);
        let mut b = param_with_grad(0.2, -0.4);
        let hp = AdamParams::default();
        for _ in 0..5 {
            adam_step(&mut a, &hp);
            adam_step(&mut b, &hp);
        }
        assert_eq!(a.value.data()[0], b.value.data()[0]);
        assert_eq!(a.adam_m.data()[0], b.adam_m.data()[0]);
        assert_eq!(a.adam_v.data()[0], b.adam_v.data()[0]);
    }

    /// Constant gradient: every step moves the value in the gradient's
    /// opposite direction, by roughly lr once moments warm up.
    #[test]
    fn constant_gradient_descends_monotonically() {
        let mut p = param_with_grad(1.0, 0.5);
        let hp = AdamParams::default();
        let mut last = p.value.data()[0];
        for _ in 0..10 {
            p.grad.data_mut()[0] = 0.5;
            adam_step(&mut p, &hp);
            let now = p.value.data()[0];
            assert!(now < last);
            last = now;
        }
    }
}
