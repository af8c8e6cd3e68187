//! Binary cross-entropy with clamped probabilities.

use super::tensor::Scalar;

/// Predictions are clamped into [PROB_CLAMP, 1 - PROB_CLAMP] before the
/// logarithms, so the loss is finite for any input.
pub const PROB_CLAMP: f64 = 1e-12;

/// -[t ln p + (1-t) ln(1-p)] with p clamped.
///
/// Evaluated at f64 internally: an f32 sigmoid can round to exactly 1.0,
/// and the clamp bound is below f32 resolution near one.
pub fn bce_loss<F: Scalar>(prediction: F, target: F) -> F {
    let p = prediction.to_f64().clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let t = target.to_f64();
    F::from_f64(-(t * p.ln() + (1.0 - t) * (1.0 - p).ln()))
}

/// d(bce_loss)/d(prediction). Zero outside the clamp range, where the
/// clamped loss is constant.
pub fn bce_grad<F: Scalar>(prediction: F, target: F) -> F {
    let p = prediction.to_f64();
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        return F::zero();
    }
    let t = target.to_f64();
    F::from_f64(-t / p + (1.0 - t) / (1.0 - p))
}
