//! Central finite-difference verification of the backward pass.
//!
//! Only `Graph<f64>` is checkable: finite differences at f32 drown in
//! rounding noise long before the 1e-4 tolerance the engine is held to.

use super::graph::Graph;
use super::layer::Mode;
use super::loss::{bce_grad, bce_loss};
use super::tensor::Tensor;
use super::NnError;

/// Compares every analytic parameter gradient against a central
/// difference of the binary cross-entropy loss and returns the worst
/// relative error, |a - n| / max(|a|, |n|), taking gradients where both
/// sides are below 1e-8 as exactly agreeing.
///
/// The graph must be deterministic: dropout in train mode is rejected.
pub fn gradcheck(
    graph: &mut Graph<f64>,
    input: &Tensor<f64>,
    target: f64,
    eps: f64,
    mode: Mode,
) -> Result<f64, NnError> {
    if mode == Mode::Train && graph.has_train_time_randomness() {
        return Err(NnError::NonDeterministicGraph);
    }

    graph.zero_grads();
    let record = graph.forward(input.clone(), mode, None)?;
    let p = graph.output(&record).data()[0];
    let loss = bce_loss(p, target);
    if !loss.is_finite() {
        return Err(NnError::NonFiniteLoss(loss));
    }
    graph.backward(&record, Tensor::scalar(bce_grad(p, target)))?;
    let analytic: Vec<f64> = graph
        .parameters()
        .flat_map(|p| p.grad.data().iter().copied())
        .collect();
    let sizes: Vec<usize> = graph.parameters().map(|p| p.value.len()).collect();

    let loss_at = |graph: &mut Graph<f64>| -> Result<f64, NnError> {
        let rec = graph.forward(input.clone(), mode, None)?;
        let p = graph.output(&rec).data()[0];
        let l = bce_loss(p, target);
        if !l.is_finite() {
            return Err(NnError::NonFiniteLoss(l));
        }
        Ok(l)
    };

    let mut worst = 0.0f64;
    let mut flat = 0;
    for (pi, &size) in sizes.iter().enumerate() {
        for si in 0..size {
            let original = graph.parameters_mut()[pi].value.data()[si];
            graph.parameters_mut()[pi].value.data_mut()[si] = original + eps;
            let up = loss_at(graph)?;
            graph.parameters_mut()[pi].value.data_mut()[si] = original - eps;
            let down = loss_at(graph)?;
            graph.parameters_mut()[pi].value.data_mut()[si] = original;

            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[flat];
            let rel = if a.abs() < 1e-8 && numeric.abs() < 1e-8 {
                0.0
            } else {
                (a - numeric).abs() / a.abs().max(numeric.abs())
            };
            worst = worst.max(rel);
            flat += 1;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::activation::Activation;
    use crate::nn::graph::NodeInput;
    use crate::nn::layer::{
        ConcatKind, Conv1d, Dense, Dropout, Layer, MaxPool, Output, OutputKind,
    };
    use crate::rng::rng_for;

    const EPS: f64 = 1e-5;

    #[test]
    fn dense_only_model_is_exact_to_1e6() {
        let mut rng = rng_for(101, "gc");
        let mut g: Graph<f64> = Graph::new();
        let d = g.add(
            "dense",
            Layer::Dense(Dense::new("dense", 5, 3, Activation::Tanh, 0.0, &mut rng)),
            NodeInput::Source,
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 3, OutputKind::Sigmoid, &mut rng)),
            NodeInput::Node(d),
        );
        let input = Tensor::uniform(vec![5], 1.0, &mut rng_for(102, "x"));
        let err = gradcheck(&mut g, &input, 1.0, EPS, Mode::Infer).unwrap();
        assert!(err < 1e-6, "worst relative error {err}");
    }

    #[test]
    fn conv_pool_dense_model_passes_at_1e4() {
        for act in Activation::ALL {
            let mut rng = rng_for(103, "gc");
            let mut g: Graph<f64> = Graph::new();
            let c = g.add(
                "conv",
                Layer::Conv1d(Conv1d::new("conv", 3, 2, 4, 1, act, &mut rng)),
                NodeInput::Source,
            );
            let p = g.add("pool", Layer::MaxPool(MaxPool::new(3)), NodeInput::Node(c));
            let f = g.add(
                "flatten",
                Layer::Concat(ConcatKind::Flatten),
                NodeInput::Node(p),
            );
            let d = g.add(
                "dense",
                Layer::Dense(Dense::new("dense", 12, 4, Activation::Relu, 0.0, &mut rng)),
                NodeInput::Node(f),
            );
            g.add(
                "output",
                Layer::Output(Output::new("output", 4, OutputKind::Softplus, &mut rng)),
                NodeInput::Node(d),
            );
            let input = Tensor::uniform(vec![9, 2], 1.0, &mut rng_for(104, "x"));
            let err = gradcheck(&mut g, &input, 0.0, EPS, Mode::Infer).unwrap();
            assert!(err < 1e-4, "{act:?}: worst relative error {err}");
        }
    }

    #[test]
    fn strided_convolution_gradients_are_correct() {
        let mut rng = rng_for(105, "gc");
        let mut g: Graph<f64> = Graph::new();
        let c = g.add(
            "conv",
            Layer::Conv1d(Conv1d::new("conv", 2, 1, 3, 2, Activation::Tanh, &mut rng)),
            NodeInput::Source,
        );
        let f = g.add(
            "flatten",
            Layer::Concat(ConcatKind::Flatten),
            NodeInput::Node(c),
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 12, OutputKind::Sigmoid, &mut rng)),
            NodeInput::Node(f),
        );
        let input = Tensor::uniform(vec![9, 1], 1.0, &mut rng_for(106, "x"));
        let err = gradcheck(&mut g, &input, 1.0, EPS, Mode::Infer).unwrap();
        assert!(err < 1e-4, "worst relative error {err}");
    }

    #[test]
    fn channel_concat_merge_gradients_are_correct() {
        let mut rng = rng_for(107, "gc");
        let mut g: Graph<f64> = Graph::new();
        let c1 = g.add(
            "conv.k1",
            Layer::Conv1d(Conv1d::new("c1", 1, 2, 3, 1, Activation::Tanh, &mut rng)),
            NodeInput::Source,
        );
        let c2 = g.add(
            "conv.k2",
            Layer::Conv1d(Conv1d::new("c2", 2, 2, 3, 1, Activation::Tanh, &mut rng)),
            NodeInput::Source,
        );
        let merge = g.add(
            "merge",
            Layer::Concat(ConcatKind::Channel),
            NodeInput::Many(vec![c1, c2]),
        );
        let pool = g.add("pool", Layer::MaxPool(MaxPool::new(2)), NodeInput::Node(merge));
        let f = g.add(
            "flatten",
            Layer::Concat(ConcatKind::Flatten),
            NodeInput::Node(pool),
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 18, OutputKind::Sigmoid, &mut rng)),
            NodeInput::Node(f),
        );
        let input = Tensor::uniform(vec![6, 2], 1.0, &mut rng_for(108, "x"));
        let err = gradcheck(&mut g, &input, 1.0, EPS, Mode::Infer).unwrap();
        assert!(err < 1e-4, "worst relative error {err}");
    }

    #[test]
    fn dropout_in_train_mode_is_rejected() {
        let mut rng = rng_for(109, "gc");
        let mut g: Graph<f64> = Graph::new();
        let d = g.add(
            "dropout",
            Layer::Dropout(Dropout::new(0.35)),
            NodeInput::Source,
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 4, OutputKind::Sigmoid, &mut rng)),
            NodeInput::Node(d),
        );
        let input = Tensor::uniform(vec![4], 1.0, &mut rng_for(110, "x"));
        assert!(matches!(
            gradcheck(&mut g, &input, 1.0, EPS, Mode::Train),
            Err(NnError::NonDeterministicGraph)
        ));
        // The same graph checks fine in infer mode, where dropout is an
        // identity.
        let err = gradcheck(&mut g, &input, 1.0, EPS, Mode::Infer).unwrap();
        assert!(err < 1e-6);
    }
}
