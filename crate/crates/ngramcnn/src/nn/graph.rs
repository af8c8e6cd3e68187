//! Layer graph with recorded forward passes and reverse-mode backward.
//!
//! Nodes are appended in topological order; each node names its inputs by
//! index, so parallel branches and merges are plain data. A forward pass
//! borrows the graph immutably and returns a [`RunRecord`], which makes a
//! model in infer mode shareable across concurrent predictions; only
//! [`Graph::backward`] and the optimizer steps need `&mut`.

use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamParams};
use super::layer::{Cache, Layer, Mode};
use super::tensor::{Parameter, Scalar, Tensor};
use super::NnError;

/// Where a node reads from: the graph's source tensor, one earlier node,
/// or several earlier nodes (merge layers only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeInput {
    Source,
    Node(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct Node<F> {
    pub name: String,
    pub layer: Layer<F>,
    pub input: NodeInput,
}

/// Everything a backward pass needs from one forward pass: the source,
/// every node's output, and every node's cache.
#[derive(Debug, Clone)]
pub struct RunRecord<F> {
    source: Tensor<F>,
    values: Vec<Tensor<F>>,
    caches: Vec<Cache<F>>,
}

/// One row of [`Graph::summary`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSummary {
    pub name: String,
    pub output_shape: Vec<usize>,
    pub param_count: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Graph<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    /// Appends a node and returns its index. Inputs must point at already
    /// appended nodes; `Many` may not contain the source.
    pub fn add(&mut self, name: impl Into<String>, layer: Layer<F>, input: NodeInput) -> usize {
        match &input {
            NodeInput::Source => {}
            NodeInput::Node(j) => assert!(*j < self.nodes.len(), "input node not yet added"),
            NodeInput::Many(js) => {
                assert!(!js.is_empty());
                for j in js {
                    assert!(*j < self.nodes.len(), "input node not yet added");
                }
            }
        }
        self.nodes.push(Node {
            name: name.into(),
            layer,
            input,
        });
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node<F>] {
        &self.nodes
    }

    /// Runs the graph on `source` and records every intermediate value.
    /// The last appended node is the graph output.
    pub fn forward(
        &self,
        source: Tensor<F>,
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<RunRecord<F>, NnError> {
        let mut values: Vec<Tensor<F>> = Vec::with_capacity(self.nodes.len());
        let mut caches: Vec<Cache<F>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let inputs = gather(&node.input, &source, &values);
            let (out, cache) = node.layer.forward(&inputs, mode, &mut rng)?;
            values.push(out);
            caches.push(cache);
        }
        Ok(RunRecord {
            source,
            values,
            caches,
        })
    }

    /// Output tensor of a recorded pass.
    pub fn output<'a>(&self, record: &'a RunRecord<F>) -> &'a Tensor<F> {
        record.values.last().expect("graph is never empty at use")
    }

    /// Recorded per-node outputs in graph order, paired with node names.
    pub fn activations<'a>(
        &'a self,
        record: &'a RunRecord<F>,
    ) -> impl Iterator<Item = (&'a str, &'a Tensor<F>)> {
        self.nodes
            .iter()
            .map(|n| n.name.as_str())
            .zip(record.values.iter())
    }

    /// Walks the record backwards, accumulating dloss/dparameter into
    /// every parameter's `grad`. `output_grad` is dloss/doutput. Source
    /// gradients are not computed (inputs are fixed embeddings).
    pub fn backward(
        &mut self,
        record: &RunRecord<F>,
        output_grad: Tensor<F>,
    ) -> Result<(), NnError> {
        if record.values.len() != self.nodes.len() {
            return Err(NnError::ForeignRecord);
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor<F>>> = (0..n).map(|_| None).collect();
        grads[n - 1] = Some(output_grad);
        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &mut self.nodes[i];
            let inputs = gather(&node.input, &record.source, &record.values);
            let want = !matches!(node.input, NodeInput::Source);
            let in_grads =
                node.layer
                    .backward(&inputs, &record.values[i], &record.caches[i], &g, want)?;
            match &node.input {
                NodeInput::Source => {}
                NodeInput::Node(j) => {
                    if let Some(ig) = in_grads.into_iter().next().flatten() {
                        accumulate(&mut grads[*j], ig);
                    }
                }
                NodeInput::Many(js) => {
                    for (j, ig) in js.iter().zip(in_grads) {
                        if let Some(ig) = ig {
                            accumulate(&mut grads[*j], ig);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Parameters in graph order (node order, weight before bias). This
    /// order defines the checkpoint layout.
    pub fn parameters(&self) -> impl Iterator<Item = &Parameter<F>> {
        self.nodes.iter().flat_map(|n| n.layer.parameters())
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<F>> {
        self.nodes
            .iter_mut()
            .flat_map(|n| n.layer.parameters_mut())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.nodes.iter().map(|n| n.layer.param_count()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    /// Multiplies every gradient by `s` (batch averaging).
    pub fn scale_grads(&mut self, s: F) {
        for p in self.parameters_mut() {
            for g in p.grad.data_mut() {
                *g = *g * s;
            }
        }
    }

    /// Sum of l2 * sum(w^2) over dense weight matrices, bias excluded.
    pub fn l2_penalty(&self) -> F {
        let mut total = F::zero();
        for node in &self.nodes {
            if let Layer::Dense(d) = &node.layer {
                if d.l2 > 0.0 {
                    total = total + F::from_f64(d.l2) * d.weight.value.sum_squares();
                }
            }
        }
        total
    }

    /// Adds the penalty term's 2 * l2 * w to each dense weight gradient.
    /// Call once per batch, after any gradient averaging.
    pub fn apply_l2_gradients(&mut self) {
        for node in &mut self.nodes {
            if let Layer::Dense(d) = &mut node.layer {
                if d.l2 > 0.0 {
                    let scale = F::from_f64(2.0 * d.l2);
                    d.weight.grad.add_scaled(&d.weight.value, scale);
                }
            }
        }
    }

    pub fn adam_step_all(&mut self, hp: &AdamParams) {
        for p in self.parameters_mut() {
            adam_step(p, hp);
        }
    }

    /// True if any layer draws randomness in train mode.
    pub fn has_train_time_randomness(&self) -> bool {
        self.nodes.iter().any(|n| n.layer.is_train_time_random())
    }

    /// Symbolic shape walk. Output shapes here are the contract the
    /// runtime must realize; a convolution running out of rows is
    /// reported against the offending node by name.
    pub fn summary(&self, source_shape: &[usize]) -> Result<Vec<LayerSummary>, NnError> {
        let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(self.nodes.len());
        let mut rows = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let in_shapes: Vec<&[usize]> = match &node.input {
                NodeInput::Source => vec![source_shape],
                NodeInput::Node(j) => vec![shapes[*j].as_slice()],
                NodeInput::Many(js) => js.iter().map(|j| shapes[*j].as_slice()).collect(),
            };
            let out = node.layer.out_shape(&in_shapes).map_err(|e| match e {
                NnError::InputShorterThanKernel { .. } => NnError::LengthUnderflow {
                    layer: node.name.clone(),
                },
                other => other,
            })?;
            rows.push(LayerSummary {
                name: node.name.clone(),
                output_shape: out.clone(),
                param_count: node.layer.param_count(),
            });
            shapes.push(out);
        }
        Ok(rows)
    }
}

fn gather<'a, F>(
    input: &NodeInput,
    source: &'a Tensor<F>,
    values: &'a [Tensor<F>],
) -> Vec<&'a Tensor<F>> {
    match input {
        NodeInput::Source => vec![source],
        NodeInput::Node(j) => vec![&values[*j]],
        NodeInput::Many(js) => js.iter().map(|j| &values[*j]).collect(),
    }
}

fn accumulate<F: Scalar>(slot: &mut Option<Tensor<F>>, g: Tensor<F>) {
    match slot {
        None => *slot = Some(g),
        Some(existing) => existing.add_scaled(&g, F::one()),
    }
}
