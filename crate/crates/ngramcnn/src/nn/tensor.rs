//! Row-major tensors and trainable parameters.

use std::fmt;
use std::iter::Sum;

use num_traits::Float;
use rand_chacha::ChaCha8Rng;

/// Element type of every tensor in the engine.
///
/// `f32` is the training and checkpoint width; `f64` is what gradient
/// checking instantiates. Conversions go through `f64` so that a given
/// seed produces the same draw sequence at either width.
pub trait Scalar:
    Float + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// A dense row-major array with an explicit shape.
///
/// Invariant: `shape` is non-empty and its product equals `data.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Self {
        assert!(!shape.is_empty(), "tensor shape must be non-empty");
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} elements",
            data.len()
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor::new(shape, vec![F::zero(); len])
    }

    pub fn scalar(value: F) -> Self {
        Tensor::new(vec![1], vec![value])
    }

    /// Uniform draw in `[-bound, bound]`, consumed as f64 so the stream is
    /// identical for `f32` and `f64` instantiations.
    pub fn uniform(shape: Vec<usize>, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        use rand::Rng;
        let len = shape.iter().product();
        let data = (0..len)
            .map(|_| F::from_f64(rng.random_range(-bound..=bound)))
            .collect();
        Tensor::new(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Number of rows when viewed as a matrix (first axis).
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns when viewed as a matrix (product of trailing axes).
    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    #[inline]
    pub fn at2(&self, r: usize, c: usize) -> F {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[r * self.shape[1] + c]
    }

    #[inline]
    pub fn set2(&mut self, r: usize, c: usize, v: F) {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[r * self.shape[1] + c] = v;
    }

    /// Row slice of a 2-D tensor.
    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        let w = self.shape[1..].iter().product::<usize>();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn fill(&mut self, v: F) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Elementwise `self += other * scale`.
    pub fn add_scaled(&mut self, other: &Tensor<F>, scale: F) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + *b * scale;
        }
    }

    pub fn sum_squares(&self) -> F {
        self.data.iter().map(|&x| x * x).sum()
    }
}

/// A trainable tensor: value, gradient and Adam moment estimates, all of
/// one shape.
#[derive(Debug, Clone)]
pub struct Parameter<F> {
    pub name: String,
    pub value: Tensor<F>,
    pub grad: Tensor<F>,
    pub adam_m: Tensor<F>,
    pub adam_v: Tensor<F>,
    pub step_count: u64,
}

impl<F: Scalar> Parameter<F> {
    pub fn new(name: impl Into<String>, value: Tensor<F>) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            name: name.into(),
            value,
            grad: Tensor::zeros(shape.clone()),
            adam_m: Tensor::zeros(shape.clone()),
            adam_v: Tensor::zeros(shape),
            step_count: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[should_panic(expected = "does not match")]
    fn shape_product_must_match_data() {
        let _ = Tensor::new(vec![2, 3], vec![0.0f64; 5]);
    }

    #[test]
    fn uniform_draws_same_pattern_at_both_widths() {
        use crate::rng::rng_for;
        let a: Tensor<f32> = Tensor::uniform(vec![8], 0.5, &mut rng_for(9, "t"));
        let b: Tensor<f64> = Tensor::uniform(vec![8], 0.5, &mut rng_for(9, "t"));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(*x, *y as f32);
        }
    }

    #[test]
    fn row_views_match_manual_indexing() {
        let t = Tensor::new(vec![2, 3], (0..6).map(|i| i as f64).collect());
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(t.at2(1, 2), 5.0);
    }
}
