//! Layer set: valid 1-D convolution, regional max-pooling, dense,
//! inverted dropout, flatten/channel concatenation, probability output.
//!
//! Forward returns the output tensor plus a [`Cache`] holding whatever the
//! backward pass cannot recover from inputs and outputs alone (pool argmax
//! rows, dropout masks, output-unit slope). Activations are differentiated
//! from their outputs, so convolution and dense layers need no cache.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::loss::PROB_CLAMP;
use super::tensor::{Parameter, Scalar, Tensor};
use super::NnError;

/// Train enables dropout masking; Infer makes every layer deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-node forward state consumed by the backward pass.
#[derive(Debug, Clone)]
pub enum Cache<F> {
    None,
    /// Input row index of the maximum for each (region, channel) cell.
    Pool { argmax: Vec<usize> },
    /// Per-unit multiplier: 0 for dropped units, 1/(1-rate) for kept ones.
    Dropout { scale: Vec<F> },
    /// Slope dp/dz of the output unit at the forward point (0 when the
    /// clamp into (0,1) was binding).
    OutputUnit { dpdz: F },
}

/// Glorot uniform bound for a layer with the given fan-in and fan-out.
fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Valid (no-padding) 1-D convolution over an n x c input, producing
/// floor((n-k)/s)+1 rows of m filters, with an elementwise activation.
#[derive(Debug, Clone)]
pub struct Conv1d<F> {
    pub kernel: usize,
    pub in_channels: usize,
    pub filters: usize,
    pub stride: usize,
    pub activation: Activation,
    /// Shape [kernel, in_channels, filters].
    pub weight: Parameter<F>,
    /// Shape [filters].
    pub bias: Parameter<F>,
}

impl<F: Scalar> Conv1d<F> {
    pub fn new(
        name: &str,
        kernel: usize,
        in_channels: usize,
        filters: usize,
        stride: usize,
        activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(kernel >= 1 && in_channels >= 1 && filters >= 1 && stride >= 1);
        let bound = glorot_bound(kernel * in_channels, kernel * filters);
        Conv1d {
            kernel,
            in_channels,
            filters,
            stride,
            activation,
            weight: Parameter::new(
                format!("{name}.w"),
                Tensor::uniform(vec![kernel, in_channels, filters], bound, rng),
            ),
            bias: Parameter::new(format!("{name}.b"), Tensor::zeros(vec![filters])),
        }
    }

    pub fn out_len(&self, n: usize) -> Result<usize, NnError> {
        if n < self.kernel {
            return Err(NnError::InputShorterThanKernel {
                input: n,
                kernel: self.kernel,
            });
        }
        Ok((n - self.kernel) / self.stride + 1)
    }

    fn forward(&self, input: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        let (n, c) = check_matrix(input)?;
        if c != self.in_channels {
            return Err(NnError::ShapeMismatch {
                expected: vec![n, self.in_channels],
                got: input.shape().to_vec(),
            });
        }
        let l_out = self.out_len(n)?;
        let m = self.filters;
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let mut out = Tensor::zeros(vec![l_out, m]);
        let mut acc = vec![F::zero(); m];
        for t in 0..l_out {
            let base = t * self.stride;
            acc.copy_from_slice(b);
            for i in 0..self.kernel {
                let row = input.row(base + i);
                for (j, &x) in row.iter().enumerate() {
                    let wrow = &w[(i * c + j) * m..(i * c + j + 1) * m];
                    for f in 0..m {
                        acc[f] = acc[f] + x * wrow[f];
                    }
                }
            }
            let orow = &mut out.data_mut()[t * m..(t + 1) * m];
            for f in 0..m {
                orow[f] = self.activation.apply(acc[f]);
            }
        }
        Ok(out)
    }

    fn backward(
        &mut self,
        input: &Tensor<F>,
        output: &Tensor<F>,
        grad_out: &Tensor<F>,
        want_input_grad: bool,
    ) -> Option<Tensor<F>> {
        let c = self.in_channels;
        let m = self.filters;
        let l_out = output.rows();
        let mut dx = want_input_grad.then(|| Tensor::zeros(input.shape().to_vec()));
        // Pre-activation gradient for one output row, reused across rows.
        let mut g = vec![F::zero(); m];
        for t in 0..l_out {
            let orow = output.row(t);
            let grow = grad_out.row(t);
            for f in 0..m {
                g[f] = grow[f] * self.activation.derivative_from_output(orow[f]);
            }
            let base = t * self.stride;
            for i in 0..self.kernel {
                let xrow = input.row(base + i);
                for j in 0..c {
                    let x = xrow[j];
                    let off = (i * c + j) * m;
                    let dwrow = &mut self.weight.grad.data_mut()[off..off + m];
                    for f in 0..m {
                        dwrow[f] = dwrow[f] + g[f] * x;
                    }
                    if let Some(dx) = dx.as_mut() {
                        let wrow = &self.weight.value.data()[off..off + m];
                        let mut s = F::zero();
                        for f in 0..m {
                            s = s + g[f] * wrow[f];
                        }
                        let cell = &mut dx.data_mut()[(base + i) * c + j];
                        *cell = *cell + s;
                    }
                }
            }
            let db = self.bias.grad.data_mut();
            for f in 0..m {
                db[f] = db[f] + g[f];
            }
        }
        dx
    }
}

/// Regional max-pooling: L rows become ceil(L/R) regions; the last region
/// may be shorter. Ties go to the first row.
#[derive(Debug, Clone)]
pub struct MaxPool {
    pub region: usize,
}

impl MaxPool {
    pub fn new(region: usize) -> Self {
        assert!(region >= 1);
        MaxPool { region }
    }

    pub fn out_len(&self, l: usize) -> usize {
        l.div_ceil(self.region)
    }

    fn forward<F: Scalar>(&self, input: &Tensor<F>) -> Result<(Tensor<F>, Vec<usize>), NnError> {
        let (l, m) = check_matrix(input)?;
        let p = self.out_len(l);
        let mut out = Tensor::zeros(vec![p, m]);
        let mut argmax = vec![0usize; p * m];
        for j in 0..p {
            let lo = j * self.region;
            let hi = ((j + 1) * self.region).min(l);
            for f in 0..m {
                let mut best_row = lo;
                let mut best = input.at2(lo, f);
                for r in lo + 1..hi {
                    let v = input.at2(r, f);
                    if v > best {
                        best = v;
                        best_row = r;
                    }
                }
                out.set2(j, f, best);
                argmax[j * m + f] = best_row;
            }
        }
        Ok((out, argmax))
    }

    fn backward<F: Scalar>(
        &self,
        input_shape: &[usize],
        argmax: &[usize],
        grad_out: &Tensor<F>,
    ) -> Tensor<F> {
        let m = input_shape[1];
        let mut dx = Tensor::zeros(input_shape.to_vec());
        for j in 0..grad_out.rows() {
            for f in 0..m {
                let row = argmax[j * m + f];
                let cell = &mut dx.data_mut()[row * m + f];
                *cell = *cell + grad_out.at2(j, f);
            }
        }
        dx
    }
}

/// Fully connected layer over a flat feature vector.
#[derive(Debug, Clone)]
pub struct Dense<F> {
    pub in_dim: usize,
    pub units: usize,
    pub activation: Activation,
    /// L2 penalty coefficient on the weight matrix (bias excluded);
    /// applied by the graph once per batch, not inside backward.
    pub l2: f64,
    /// Shape [in_dim, units].
    pub weight: Parameter<F>,
    /// Shape [units].
    pub bias: Parameter<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn new(
        name: &str,
        in_dim: usize,
        units: usize,
        activation: Activation,
        l2: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(in_dim >= 1 && units >= 1 && l2 >= 0.0);
        let bound = glorot_bound(in_dim, units);
        Dense {
            in_dim,
            units,
            activation,
            l2,
            weight: Parameter::new(
                format!("{name}.w"),
                Tensor::uniform(vec![in_dim, units], bound, rng),
            ),
            bias: Parameter::new(format!("{name}.b"), Tensor::zeros(vec![units])),
        }
    }

    fn forward(&self, input: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        check_flat(input, self.in_dim)?;
        let w = self.weight.value.data();
        let mut out = self.bias.value.clone();
        let o = out.data_mut();
        for (i, &x) in input.data().iter().enumerate() {
            let wrow = &w[i * self.units..(i + 1) * self.units];
            for u in 0..self.units {
                o[u] = o[u] + x * wrow[u];
            }
        }
        for v in o.iter_mut() {
            *v = self.activation.apply(*v);
        }
        Ok(out)
    }

    fn backward(
        &mut self,
        input: &Tensor<F>,
        output: &Tensor<F>,
        grad_out: &Tensor<F>,
        want_input_grad: bool,
    ) -> Option<Tensor<F>> {
        let g: Vec<F> = output
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&y, &go)| go * self.activation.derivative_from_output(y))
            .collect();
        let mut dx = want_input_grad.then(|| Tensor::zeros(vec![self.in_dim]));
        for (i, &x) in input.data().iter().enumerate() {
            let off = i * self.units;
            let dwrow = &mut self.weight.grad.data_mut()[off..off + self.units];
            for u in 0..self.units {
                dwrow[u] = dwrow[u] + g[u] * x;
            }
            if let Some(dx) = dx.as_mut() {
                let wrow = &self.weight.value.data()[off..off + self.units];
                let mut s = F::zero();
                for u in 0..self.units {
                    s = s + g[u] * wrow[u];
                }
                dx.data_mut()[i] = s;
            }
        }
        let db = self.bias.grad.data_mut();
        for u in 0..self.units {
            db[u] = db[u] + g[u];
        }
        dx
    }
}

/// Inverted dropout: kept units are scaled by 1/(1-rate) at train time so
/// inference is a plain identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate));
        Dropout { rate }
    }

    fn forward<F: Scalar>(
        &self,
        input: &Tensor<F>,
        mode: Mode,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor<F>, Cache<F>), NnError> {
        if mode == Mode::Infer || self.rate == 0.0 {
            return Ok((input.clone(), Cache::None));
        }
        let rng = rng.as_deref_mut().ok_or(NnError::MissingRng)?;
        let keep = 1.0 - self.rate;
        let boost = F::from_f64(1.0 / keep);
        // Mask drawn at f64 so f32 and f64 graphs see the same pattern.
        let scale: Vec<F> = (0..input.len())
            .map(|_| {
                if rng.random::<f64>() < keep {
                    boost
                } else {
                    F::zero()
                }
            })
            .collect();
        let mut out = input.clone();
        for (v, &s) in out.data_mut().iter_mut().zip(&scale) {
            *v = *v * s;
        }
        Ok((out, Cache::Dropout { scale }))
    }
}

/// How a multi-input node merges its branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcatKind {
    /// Flatten every input row-major and concatenate into one vector.
    /// With a single input this is a plain flatten.
    Flatten,
    /// Truncate all inputs to the shortest row count, then concatenate
    /// along the channel axis. Inputs must be matrices.
    Channel,
}

/// Single probability unit closing the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Sigmoid,
    Softplus,
}

#[derive(Debug, Clone)]
pub struct Output<F> {
    pub kind: OutputKind,
    pub in_dim: usize,
    /// Shape [in_dim].
    pub weight: Parameter<F>,
    /// Shape [1].
    pub bias: Parameter<F>,
}

impl<F: Scalar> Output<F> {
    pub fn new(name: &str, in_dim: usize, kind: OutputKind, rng: &mut ChaCha8Rng) -> Self {
        assert!(in_dim >= 1);
        let bound = glorot_bound(in_dim, 1);
        Output {
            kind,
            in_dim,
            weight: Parameter::new(
                format!("{name}.w"),
                Tensor::uniform(vec![in_dim], bound, rng),
            ),
            bias: Parameter::new(format!("{name}.b"), Tensor::zeros(vec![1])),
        }
    }

    fn forward(&self, input: &Tensor<F>) -> Result<(Tensor<F>, Cache<F>), NnError> {
        check_flat(input, self.in_dim)?;
        let mut z = self.bias.value.data()[0];
        for (&x, &w) in input.data().iter().zip(self.weight.value.data()) {
            z = z + x * w;
        }
        let one = F::one();
        let lo = F::from_f64(PROB_CLAMP);
        let mut hi = one - lo;
        if hi >= one {
            // f64 clamp bound is below f32 resolution; use the largest
            // representable value strictly below one instead.
            hi = one - F::epsilon() / (one + one);
        }
        let (raw, slope) = match self.kind {
            OutputKind::Sigmoid => {
                let p = stable_sigmoid(z);
                (p, p * (one - p))
            }
            OutputKind::Softplus => {
                let q = stable_softplus(z);
                (q, one - (-q).exp())
            }
        };
        let (p, dpdz) = if raw < lo {
            (lo, F::zero())
        } else if raw > hi {
            (hi, F::zero())
        } else {
            (raw, slope)
        };
        Ok((Tensor::scalar(p), Cache::OutputUnit { dpdz }))
    }

    fn backward(
        &mut self,
        input: &Tensor<F>,
        dpdz: F,
        grad_out: &Tensor<F>,
        want_input_grad: bool,
    ) -> Option<Tensor<F>> {
        let g = grad_out.data()[0] * dpdz;
        let dw = self.weight.grad.data_mut();
        for (i, &x) in input.data().iter().enumerate() {
            dw[i] = dw[i] + g * x;
        }
        self.bias.grad.data_mut()[0] = self.bias.grad.data()[0] + g;
        want_input_grad.then(|| {
            let mut dx = Tensor::zeros(vec![self.in_dim]);
            for (d, &w) in dx.data_mut().iter_mut().zip(self.weight.value.data()) {
                *d = g * w;
            }
            dx
        })
    }
}

fn stable_sigmoid<F: Scalar>(z: F) -> F {
    let one = F::one();
    if z >= F::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    }
}

fn stable_softplus<F: Scalar>(z: F) -> F {
    z.max(F::zero()) + (-z.abs()).exp().ln_1p()
}

fn check_matrix<F: Scalar>(t: &Tensor<F>) -> Result<(usize, usize), NnError> {
    match t.shape() {
        [n, c] => Ok((*n, *c)),
        other => Err(NnError::ShapeMismatch {
            expected: vec![0, 0],
            got: other.to_vec(),
        }),
    }
}

fn check_flat<F: Scalar>(t: &Tensor<F>, want: usize) -> Result<(), NnError> {
    if t.shape() != [want] {
        return Err(NnError::ShapeMismatch {
            expected: vec![want],
            got: t.shape().to_vec(),
        });
    }
    Ok(())
}

/// One node's computation.
#[derive(Debug, Clone)]
pub enum Layer<F> {
    Conv1d(Conv1d<F>),
    MaxPool(MaxPool),
    Dense(Dense<F>),
    Dropout(Dropout),
    Concat(ConcatKind),
    Output(Output<F>),
}

impl<F: Scalar> Layer<F> {
    /// Output shape from input shapes, without running anything. Errors
    /// mirror the runtime ones, so builders can validate configurations.
    pub fn out_shape(&self, in_shapes: &[&[usize]]) -> Result<Vec<usize>, NnError> {
        match self {
            Layer::Conv1d(c) => {
                let (n, ch) = shape_matrix(in_shapes[0])?;
                if ch != c.in_channels {
                    return Err(NnError::ShapeMismatch {
                        expected: vec![n, c.in_channels],
                        got: in_shapes[0].to_vec(),
                    });
                }
                Ok(vec![c.out_len(n)?, c.filters])
            }
            Layer::MaxPool(p) => {
                let (l, m) = shape_matrix(in_shapes[0])?;
                Ok(vec![p.out_len(l), m])
            }
            Layer::Dense(d) => {
                shape_flat(in_shapes[0], d.in_dim)?;
                Ok(vec![d.units])
            }
            Layer::Dropout(_) => Ok(in_shapes[0].to_vec()),
            Layer::Concat(ConcatKind::Flatten) => {
                Ok(vec![in_shapes.iter().map(|s| s.iter().product::<usize>()).sum()])
            }
            Layer::Concat(ConcatKind::Channel) => {
                let mut min_rows = usize::MAX;
                let mut channels = 0;
                for s in in_shapes {
                    let (l, m) = shape_matrix(s)?;
                    min_rows = min_rows.min(l);
                    channels += m;
                }
                Ok(vec![min_rows, channels])
            }
            Layer::Output(o) => {
                shape_flat(in_shapes[0], o.in_dim)?;
                Ok(vec![1])
            }
        }
    }

    pub fn forward(
        &self,
        inputs: &[&Tensor<F>],
        mode: Mode,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor<F>, Cache<F>), NnError> {
        match self {
            Layer::Conv1d(c) => Ok((c.forward(inputs[0])?, Cache::None)),
            Layer::MaxPool(p) => {
                let (out, argmax) = p.forward(inputs[0])?;
                Ok((out, Cache::Pool { argmax }))
            }
            Layer::Dense(d) => Ok((d.forward(inputs[0])?, Cache::None)),
            Layer::Dropout(d) => d.forward(inputs[0], mode, rng),
            Layer::Concat(ConcatKind::Flatten) => {
                let mut data = Vec::with_capacity(inputs.iter().map(|t| t.len()).sum());
                for t in inputs {
                    data.extend_from_slice(t.data());
                }
                let len = data.len();
                Ok((Tensor::new(vec![len], data), Cache::None))
            }
            Layer::Concat(ConcatKind::Channel) => {
                let mut min_rows = usize::MAX;
                let mut channels = 0;
                for t in inputs {
                    let (l, m) = check_matrix(t)?;
                    min_rows = min_rows.min(l);
                    channels += m;
                }
                let mut out = Tensor::zeros(vec![min_rows, channels]);
                for r in 0..min_rows {
                    let mut off = 0;
                    for t in inputs {
                        let m = t.cols();
                        out.data_mut()[r * channels + off..r * channels + off + m]
                            .copy_from_slice(t.row(r));
                        off += m;
                    }
                }
                Ok((out, Cache::None))
            }
            Layer::Output(o) => o.forward(inputs[0]),
        }
    }

    /// Accumulates parameter gradients and returns per-input gradients in
    /// input order. `None` entries mean the caller asked to skip them.
    pub fn backward(
        &mut self,
        inputs: &[&Tensor<F>],
        output: &Tensor<F>,
        cache: &Cache<F>,
        grad_out: &Tensor<F>,
        want_input_grads: bool,
    ) -> Result<Vec<Option<Tensor<F>>>, NnError> {
        match (self, cache) {
            (Layer::Conv1d(c), _) => {
                Ok(vec![c.backward(inputs[0], output, grad_out, want_input_grads)])
            }
            (Layer::MaxPool(p), Cache::Pool { argmax }) => Ok(vec![want_input_grads
                .then(|| p.backward(inputs[0].shape(), argmax, grad_out))]),
            (Layer::Dense(d), _) => {
                Ok(vec![d.backward(inputs[0], output, grad_out, want_input_grads)])
            }
            (Layer::Dropout(_), Cache::None) => Ok(vec![want_input_grads
                .then(|| grad_out.clone())]),
            (Layer::Dropout(_), Cache::Dropout { scale }) => Ok(vec![want_input_grads.then(
                || {
                    let mut dx = grad_out.clone();
                    for (d, &s) in dx.data_mut().iter_mut().zip(scale) {
                        *d = *d * s;
                    }
                    dx
                },
            )]),
            (Layer::Concat(ConcatKind::Flatten), _) => {
                if !want_input_grads {
                    return Ok(vec![None; inputs.len()]);
                }
                let mut grads = Vec::with_capacity(inputs.len());
                let mut off = 0;
                for t in inputs {
                    let part = grad_out.data()[off..off + t.len()].to_vec();
                    grads.push(Some(Tensor::new(t.shape().to_vec(), part)));
                    off += t.len();
                }
                Ok(grads)
            }
            (Layer::Concat(ConcatKind::Channel), _) => {
                if !want_input_grads {
                    return Ok(vec![None; inputs.len()]);
                }
                let min_rows = grad_out.rows();
                let mut grads: Vec<Tensor<F>> = inputs
                    .iter()
                    .map(|t| Tensor::zeros(t.shape().to_vec()))
                    .collect();
                for r in 0..min_rows {
                    let mut off = 0;
                    for (t, dx) in inputs.iter().zip(grads.iter_mut()) {
                        let m = t.cols();
                        let src = &grad_out.row(r)[off..off + m];
                        dx.data_mut()[r * m..(r + 1) * m].copy_from_slice(src);
                        off += m;
                    }
                }
                Ok(grads.into_iter().map(Some).collect())
            }
            (Layer::Output(o), Cache::OutputUnit { dpdz }) => {
                Ok(vec![o.backward(inputs[0], *dpdz, grad_out, want_input_grads)])
            }
            _ => unreachable!("cache kind always matches its layer"),
        }
    }

    pub fn parameters(&self) -> Vec<&Parameter<F>> {
        match self {
            Layer::Conv1d(c) => vec![&c.weight, &c.bias],
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            Layer::Output(o) => vec![&o.weight, &o.bias],
            _ => Vec::new(),
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        match self {
            Layer::Conv1d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            Layer::Output(o) => vec![&mut o.weight, &mut o.bias],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|p| p.value.len()).sum()
    }

    /// True for layers that draw randomness at train time.
    pub fn is_train_time_random(&self) -> bool {
        matches!(self, Layer::Dropout(d) if d.rate > 0.0)
    }
}

fn shape_matrix(s: &[usize]) -> Result<(usize, usize), NnError> {
    match s {
        [n, c] => Ok((*n, *c)),
        other => Err(NnError::ShapeMismatch {
            expected: vec![0, 0],
            got: other.to_vec(),
        }),
    }
}

fn shape_flat(s: &[usize], want: usize) -> Result<(), NnError> {
    if s != [want] {
        return Err(NnError::ShapeMismatch {
            expected: vec![want],
            got: s.to_vec(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use approx::assert_relative_eq;

    fn conv_with_weights(
        kernel: usize,
        weights: &[f64],
        activation: Activation,
    ) -> Conv1d<f64> {
        let mut c = Conv1d::new(
            "c",
            kernel,
            1,
            1,
            1,
            activation,
            &mut rng_for(0, "test.conv"),
        );
        c.weight.value.data_mut().copy_from_slice(weights);
        c.bias.value.data_mut()[0] = 0.0;
        c
    }

    fn col(values: &[f64]) -> Tensor<f64> {
        Tensor::new(vec![values.len(), 1], values.to_vec())
    }

    #[test]
    fn unit_kernel_convolution_is_identity() {
        let c = conv_with_weights(1, &[1.0], Activation::Identity);
        let out = c.forward(&col(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_tap_sum_kernel_matches_hand_convolution() {
        let c = conv_with_weights(2, &[1.0, 1.0], Activation::Identity);
        let out = c.forward(&col(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(out.shape(), &[2, 1]);
        assert_eq!(out.data(), &[3.0, 5.0]);
    }

    #[test]
    fn conv_length_formula_matches_table_sizes() {
        let c = Conv1d::<f64>::new("c", 3, 1, 1, 1, Activation::Identity, &mut rng_for(0, "t"));
        assert_eq!(c.out_len(400).unwrap(), 398);
        let strided = Conv1d::<f64>::new("c", 3, 1, 1, 2, Activation::Identity, &mut rng_for(0, "t"));
        assert_eq!(strided.out_len(10).unwrap(), 4);
    }

    #[test]
    fn conv_rejects_input_shorter_than_kernel() {
        let c = conv_with_weights(2, &[1.0, 1.0], Activation::Identity);
        let err = c.forward(&col(&[1.0])).unwrap_err();
        assert!(matches!(
            err,
            NnError::InputShorterThanKernel { input: 1, kernel: 2 }
        ));
    }

    #[test]
    fn maxpool_takes_regional_maxima() {
        let p = MaxPool::new(2);
        let (out, _) = p.forward(&col(&[1.0, 3.0, 2.0, 5.0])).unwrap();
        assert_eq!(out.data(), &[3.0, 5.0]);
    }

    #[test]
    fn maxpool_last_region_may_be_short() {
        let p = MaxPool::new(2);
        let (out, argmax) = p.forward(&col(&[5.0, 1.0, 4.0])).unwrap();
        assert_eq!(out.data(), &[5.0, 4.0]);
        assert_eq!(argmax, vec![0, 2]);
        assert_eq!(p.out_len(398), 199);
        assert_eq!(MaxPool::new(25).out_len(398), 16);
    }

    #[test]
    fn maxpool_ties_break_to_first_row() {
        let p = MaxPool::new(3);
        let (out, argmax) = p.forward(&col(&[2.0, 2.0, 2.0])).unwrap();
        assert_eq!(out.data(), &[2.0]);
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn maxpool_backward_routes_gradient_to_argmax_rows() {
        let p = MaxPool::new(2);
        let input = col(&[5.0, 1.0, 4.0]);
        let (_, argmax) = p.forward(&input).unwrap();
        let grad = p.backward::<f64>(input.shape(), &argmax, &col(&[0.7, -0.3]));
        assert_eq!(grad.data(), &[0.7, 0.0, -0.3]);
    }

    #[test]
    fn dense_matches_hand_multiplication() {
        let mut d = Dense::<f64>::new("d", 2, 2, Activation::Identity, 0.0, &mut rng_for(0, "t"));
        d.weight.value.data_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        d.bias.value.data_mut().copy_from_slice(&[0.5, -0.5]);
        let out = d.forward(&Tensor::new(vec![2], vec![1.0, 1.0])).unwrap();
        assert_eq!(out.data(), &[4.5, 5.5]);
    }

    #[test]
    fn dropout_is_identity_when_inactive() {
        let d = Dropout::new(0.35);
        let input = Tensor::new(vec![4], vec![1.0f64, 2.0, 3.0, 4.0]);
        let (out, _) = d.forward(&input, Mode::Infer, &mut None).unwrap();
        assert_eq!(out.data(), input.data());
        let zero = Dropout::new(0.0);
        let mut rng = rng_for(1, "t");
        let (out, _) = zero
            .forward(&input, Mode::Train, &mut Some(&mut rng))
            .unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn dropout_train_mode_without_rng_is_an_error() {
        let d = Dropout::new(0.35);
        let input = Tensor::new(vec![2], vec![1.0f64, 2.0]);
        assert!(matches!(
            d.forward(&input, Mode::Train, &mut None),
            Err(NnError::MissingRng)
        ));
    }

    /// Kept fraction over 10k units stays within 0.65 +/- 0.05, and kept
    /// units carry exactly the inverted-dropout boost.
    #[test]
    fn dropout_keeps_the_expected_fraction() {
        let d = Dropout::new(0.35);
        let input = Tensor::new(vec![10_000], vec![1.0f64; 10_000]);
        let mut rng = rng_for(42, "dropout.test");
        let (out, cache) = d
            .forward(&input, Mode::Train, &mut Some(&mut rng))
            .unwrap();
        let kept = out.data().iter().filter(|v| **v != 0.0).count();
        let frac = kept as f64 / 10_000.0;
        assert!((frac - 0.65).abs() < 0.05, "kept fraction {frac}");
        for &v in out.data() {
            assert!(v == 0.0 || (v - 1.0 / 0.65).abs() < 1e-12);
        }
        let Cache::Dropout { scale } = cache else {
            panic!("expected a dropout cache")
        };
        assert_eq!(scale.len(), 10_000);
    }

    #[test]
    fn flatten_concat_preserves_input_order() {
        let a = Tensor::new(vec![2, 2], vec![1.0f64, 2.0, 3.0, 4.0]);
        let b = Tensor::new(vec![2], vec![5.0, 6.0]);
        let layer = Layer::Concat(ConcatKind::Flatten);
        let (out, _) = layer.forward(&[&a, &b], Mode::Infer, &mut None).unwrap();
        assert_eq!(out.shape(), &[6]);
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn channel_concat_truncates_to_shortest_branch() {
        let a = Tensor::new(vec![3, 1], vec![1.0f64, 2.0, 3.0]);
        let b = Tensor::new(vec![2, 1], vec![10.0, 20.0]);
        let layer = Layer::Concat(ConcatKind::Channel);
        let (out, cache) = layer.forward(&[&a, &b], Mode::Infer, &mut None).unwrap();
        assert_eq!(out.shape(), &[2, 2]);
        assert_eq!(out.data(), &[1.0, 10.0, 2.0, 20.0]);

        // The truncated third row of `a` must get zero gradient back.
        let mut l = layer.clone();
        let grads = l
            .backward(
                &[&a, &b],
                &out,
                &cache,
                &Tensor::new(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]),
                true,
            )
            .unwrap();
        assert_eq!(grads[0].as_ref().unwrap().data(), &[0.1, 0.3, 0.0]);
        assert_eq!(grads[1].as_ref().unwrap().data(), &[0.2, 0.4]);
    }

    #[test]
    fn output_unit_stays_strictly_inside_the_unit_interval() {
        for kind in [OutputKind::Sigmoid, OutputKind::Softplus] {
            let mut o = Output::<f32>::new("out", 1, kind, &mut rng_for(3, "t"));
            o.weight.value.data_mut()[0] = 1.0;
            for z in [-80.0f32, -1.0, 0.0, 1.0, 80.0] {
                let (p, _) = o.forward(&Tensor::new(vec![1], vec![z])).unwrap();
                let p = p.data()[0];
                assert!(p > 0.0 && p < 1.0, "{kind:?} at z={z} gave {p}");
            }
        }
    }

    /// dp/dz recorded at forward time must match a central difference
    /// through the whole unit, for both output kinds.
    #[test]
    fn output_slope_matches_finite_difference() {
        for kind in [OutputKind::Sigmoid, OutputKind::Softplus] {
            let mut o = Output::<f64>::new("out", 1, kind, &mut rng_for(3, "t"));
            o.weight.value.data_mut()[0] = 1.0;
            o.bias.value.data_mut()[0] = 0.0;
            for z in [-1.5f64, -0.2, 0.4, 2.0] {
                let h = 1e-6;
                let p = |x: f64| {
                    o.forward(&Tensor::new(vec![1], vec![x])).unwrap().0.data()[0]
                };
                let numeric = (p(z + h) - p(z - h)) / (2.0 * h);
                let (_, cache) = o.forward(&Tensor::new(vec![1], vec![z])).unwrap();
                let Cache::OutputUnit { dpdz } = cache else {
                    panic!("expected output cache")
                };
                assert_relative_eq!(dpdz, numeric, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn glorot_bound_is_symmetric_and_scaled() {
        assert_relative_eq!(glorot_bound(3, 3), 1.0, epsilon = 1e-12);
        assert!(glorot_bound(3360, 80) < glorot_bound(80, 80));
    }
}
