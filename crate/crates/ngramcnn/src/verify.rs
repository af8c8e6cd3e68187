//! Backward-pass verification: finite-difference suites covering every
//! layer type in isolation and the three assembled network variants at
//! toy size, all at f64 where central differences are trustworthy.

use crate::arch::{ArchError, ArchitectureConfig, Model, Variant};
use crate::nn::{
    gradcheck, Activation, ConcatKind, Conv1d, Dense, Dropout, Graph, Layer, MaxPool, Mode,
    NnError, NodeInput, Output, OutputKind, Tensor,
};
use crate::rng::rng_for;
use serde::Serialize;
use thiserror::Error;

/// Worst relative error a healthy backward pass may show under central
/// differences with [`EPS`].
pub const TOLERANCE: f64 = 1e-4;
pub const EPS: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Arch(#[from] ArchError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn worst(&self) -> f64 {
        self.checks.iter().map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() < TOLERANCE
    }
}

/// The smallest configuration that still exercises every structural
/// feature of a variant: three branch widths, two conv/pool rounds.
/// Convolutions check under tanh; at a relu corner a central difference
/// straddles the kink and reports a false mismatch (analytic 0 against
/// a nonzero probe), and the relu derivative itself is a pointwise
/// table already verified by the engine's layer-level checks.
fn toy_config(variant: Variant) -> ArchitectureConfig {
    ArchitectureConfig {
        variant,
        width: 3,
        depth: 4,
        filters: 4,
        pool_region: 2,
        stride: 2,
        doc_length: 20,
        embed_dim: 8,
        dense_units: 10,
        dropout_rate: 0.35,
        l2: 0.0,
        conv_activation: Activation::Tanh,
        output_activation: OutputKind::Sigmoid,
    }
}

/// Checks analytic gradients against central differences for a suite of
/// single-layer graphs and the three variants, seeding inputs and
/// initial weights from `seed`. Dropout runs in inference mode, where
/// it is the identity; its train-time mask routing is covered by the
/// engine's unit tests because finite differences cannot hold a random
/// mask still.
pub fn verify_backprop(seed: u64) -> Result<VerificationReport, VerifyError> {
    let mut checks = Vec::new();
    let mut targets = [1.0, 0.0].iter().cycle().copied();
    let mut run = |name: &str, graph: &mut Graph<f64>, shape: Vec<usize>| -> Result<(), NnError> {
        let mut rng = rng_for(seed, &format!("verify.input.{name}"));
        let input = Tensor::uniform(shape, 1.0, &mut rng);
        let target = targets.next().expect("cycle never ends");
        let error = gradcheck(graph, &input, target, EPS, Mode::Infer)?;
        checks.push(CheckOutcome {
            name: name.to_string(),
            error,
        });
        Ok(())
    };

    {
        let mut rng = rng_for(seed, "verify.init.dense");
        let mut g: Graph<f64> = Graph::new();
        let d = g.add(
            "dense",
            Layer::Dense(Dense::new("dense", 6, 4, Activation::Tanh, 0.0, &mut rng)),
            NodeInput::Source,
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 4, OutputKind::Sigmoid, &mut rng)),
            NodeInput::Node(d),
        );
        run("dense", &mut g, vec![6])?;
    }

    {
        let mut rng = rng_for(seed, "verify.init.conv.s1");
        let mut g: Graph<f64> = Graph::new();
        let c = g.add(
            "conv",
            Layer::Conv1d(Conv1d::new("conv", 3, 2, 3, 1, Activation::Tanh, &mut rng)),
            NodeInput::Source,
        );
        let f = g.add(
            "flatten",
            Layer::Concat(ConcatKind::Flatten),
            NodeInput::Node(c),
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 21, OutputKind::Sigmoid, &mut rng)),
            NodeInput::Node(f),
        );
        run("conv.s1", &mut g, vec![9, 2])?;
    }

    {
        let mut rng = rng_for(seed, "verify.init.conv.s2");
        let mut g: Graph<f64> = Graph::new();
        let c = g.add(
            "conv",
            Layer::Conv1d(Conv1d::new("conv", 2, 2, 3, 2, Activation::Tanh, &mut rng)),
            NodeInput::Source,
        );
        let f = g.add(
            "flatten",
            Layer::Concat(ConcatKind::Flatten),
            NodeInput::Node(c),
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 12, OutputKind::Softplus, &mut rng)),
            NodeInput::Node(f),
        );
        run("conv.s2", &mut g, vec![9, 2])?;
    }

    {
        let mut rng = rng_for(seed, "verify.init.pool");
        let mut g: Graph<f64> = Graph::new();
        let p = g.add("pool", Layer::MaxPool(MaxPool::new(3)), NodeInput::Source);
        let f = g.add(
            "flatten",
            Layer::Concat(ConcatKind::Flatten),
            NodeInput::Node(p),
        );
        let d = g.add(
            "dense",
            Layer::Dense(Dense::new("dense", 8, 4, Activation::Tanh, 0.0, &mut rng)),
            NodeInput::Node(f),
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 4, OutputKind::Sigmoid, &mut rng)),
            NodeInput::Node(d),
        );
        run("pool", &mut g, vec![10, 2])?;
    }

    {
        let mut rng = rng_for(seed, "verify.init.dropout");
        let mut g: Graph<f64> = Graph::new();
        let d = g.add(
            "dropout",
            Layer::Dropout(Dropout::new(0.35)),
            NodeInput::Source,
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 5, OutputKind::Sigmoid, &mut rng)),
            NodeInput::Node(d),
        );
        run("dropout", &mut g, vec![5])?;
    }

    {
        let mut rng = rng_for(seed, "verify.init.merge");
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
        let m = g.add(
            "merge",
            Layer::Concat(ConcatKind::Channel),
            NodeInput::Many(vec![c1, c2]),
        );
        let p = g.add("pool", Layer::MaxPool(MaxPool::new(2)), NodeInput::Node(m));
        let f = g.add(
            "flatten",
            Layer::Concat(ConcatKind::Flatten),
            NodeInput::Node(p),
        );
        g.add(
            "output",
            Layer::Output(Output::new("output", 18, OutputKind::Sigmoid, &mut rng)),
            NodeInput::Node(f),
        );
        run("merge", &mut g, vec![6, 2])?;
    }

    for variant in [Variant::Basic, Variant::Pyramid, Variant::Fluctuating] {
        let mut model: Model<f64> = Model::build(toy_config(variant), seed)?;
        let name = format!("{variant:?}").to_lowercase();
        run(&name, model.graph_mut(), vec![20, 8])?;
    }

    Ok(VerificationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_whole_suite_passes_at_the_stated_tolerance() {
        let report = verify_backprop(0).unwrap();
        assert!(
            report.passed(),
            "worst relative error {} in {:?}",
            report.worst(),
            report
                .checks
                .iter()
                .max_by(|a, b| a.error.total_cmp(&b.error))
        );
        let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
        for expected in [
            "dense",
            "conv.s1",
            "conv.s2",
            "pool",
            "dropout",
            "merge",
            "basic",
            "pyramid",
            "fluctuating",
        ] {
            assert!(names.contains(&expected), "missing check {expected}");
        }
    }

    #[test]
    fn different_seeds_still_pass() {
        for seed in [7, 42] {
            let report = verify_backprop(seed).unwrap();
            assert!(report.passed(), "seed {seed}: worst {}", report.worst());
        }
    }
}
