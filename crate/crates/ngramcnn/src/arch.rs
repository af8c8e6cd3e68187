//! The three parallel n-gram convolution network variants, assembled as
//! layer graphs: shape reporting, prediction, binary checkpoints and the
//! pool-region suggestion rule.

use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{
    Activation, ConcatKind, Conv1d, Dense, Dropout, Graph, Layer, LayerSummary, MaxPool, Mode,
    NnError, NodeInput, Output, OutputKind, Scalar, Tensor,
};
use crate::rng::rng_for;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"NGC1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Target band for the final per-branch feature-map length; the
/// suggestion rule prefers pool regions that land in it.
pub const POOLED_LEN_LO: usize = 7;
pub const POOLED_LEN_HI: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// W independent branches of conv/pool stacks, merged once at the end.
    Basic,
    /// Like basic, but every pool except the final one is a strided conv.
    Pyramid,
    /// Branches re-merge channel-wise after every conv stack, so features
    /// expand to W*m channels and contract through a shared pool each
    /// round.
    Fluctuating,
}

/// Everything needed to rebuild a network deterministically. Serialized
/// as JSON inside checkpoints; omitted fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub variant: Variant,
    /// Number of parallel kernel widths; branch k uses k-gram kernels.
    #[serde(default = "default_width")]
    pub width: usize,
    /// Total conv plus pool stacks; each branch runs depth/2 rounds.
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_filters")]
    pub filters: usize,
    pub pool_region: usize,
    /// Downsampling stride for the pyramid variant; ignored otherwise.
    #[serde(default = "default_stride")]
    pub stride: usize,
    pub doc_length: usize,
    pub embed_dim: usize,
    #[serde(default = "default_dense_units")]
    pub dense_units: usize,
    #[serde(default = "default_dropout_rate")]
    pub dropout_rate: f64,
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default = "default_conv_activation")]
    pub conv_activation: Activation,
    #[serde(default = "default_output_activation")]
    pub output_activation: OutputKind,
}

fn default_width() -> usize {
    3
}
fn default_depth() -> usize {
    4
}
fn default_filters() -> usize {
    70
}
fn default_stride() -> usize {
    1
}
fn default_dense_units() -> usize {
    80
}
fn default_dropout_rate() -> f64 {
    0.35
}
fn default_l2() -> f64 {
    0.1
}
fn default_conv_activation() -> Activation {
    Activation::Relu
}
fn default_output_activation() -> OutputKind {
    OutputKind::Sigmoid
}

impl ArchitectureConfig {
    /// A config with the standard hyperparameters filled in; the caller
    /// sets the document geometry.
    pub fn with_defaults(
        variant: Variant,
        doc_length: usize,
        embed_dim: usize,
        pool_region: usize,
    ) -> Self {
        ArchitectureConfig {
            variant,
            width: default_width(),
            depth: default_depth(),
            filters: default_filters(),
            pool_region,
            stride: default_stride(),
            doc_length,
            embed_dim,
            dense_units: default_dense_units(),
            dropout_rate: default_dropout_rate(),
            l2: default_l2(),
            conv_activation: default_conv_activation(),
            output_activation: default_output_activation(),
        }
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        fn need(ok: bool, what: &str) -> Result<(), ArchError> {
            if ok {
                Ok(())
            } else {
                Err(ArchError::BadConfig(what.to_string()))
            }
        }
        need(self.width >= 1, "width must be at least 1")?;
        need(
            self.depth >= 2 && self.depth % 2 == 0,
            "depth must be even and at least 2",
        )?;
        need(self.filters >= 1, "filters must be at least 1")?;
        need(self.pool_region >= 1, "pool_region must be at least 1")?;
        need(self.doc_length >= 1, "doc_length must be at least 1")?;
        need(self.embed_dim >= 1, "embed_dim must be at least 1")?;
        need(self.dense_units >= 1, "dense_units must be at least 1")?;
        need(
            (0.0..1.0).contains(&self.dropout_rate),
            "dropout_rate must lie in [0, 1)",
        )?;
        need(
            self.l2.is_finite() && self.l2 >= 0.0,
            "l2 must be finite and non-negative",
        )?;
        if self.variant == Variant::Pyramid && self.stride < 2 {
            return Err(ArchError::PyramidStride(self.stride));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ArchError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("pyramid downsampling needs stride >= 2, got {0}")]
    PyramidStride(usize),
    #[error("stack `{stack}` would see {input} positions, fewer than its kernel length {kernel}")]
    StackUnderflow {
        stack: String,
        input: usize,
        kernel: usize,
    },
    #[error(
        "no pool region >= 2 keeps every stack non-empty for doc length {doc_length}, \
         kernel {kernel}, depth {depth}"
    )]
    NoFeasibleRegion {
        doc_length: usize,
        kernel: usize,
        depth: usize,
    },
}

/// A built network: the config it was built from plus the live layer
/// graph holding its parameters.
#[derive(Debug, Clone)]
pub struct Model<F> {
    config: ArchitectureConfig,
    graph: Graph<F>,
}

fn init_rng(seed: u64, layer_name: &str) -> ChaCha8Rng {
    rng_for(seed, &format!("init.{layer_name}"))
}

impl<F: Scalar> Model<F> {
    /// Assembles the configured variant. Initialization is derived per
    /// layer name from `seed`, so two builds with equal config and seed
    /// have bit-identical parameters.
    pub fn build(config: ArchitectureConfig, seed: u64) -> Result<Self, ArchError> {
        config.validate()?;
        let mut graph = Graph::new();
        let feature_len = match config.variant {
            Variant::Basic | Variant::Pyramid => branch_stacks(&config, seed, &mut graph)?,
            Variant::Fluctuating => fluctuating_stacks(&config, seed, &mut graph)?,
        };
        let tail = graph.len() - 1;
        let drop = graph.add(
            "dropout",
            Layer::Dropout(Dropout::new(config.dropout_rate)),
            NodeInput::Node(tail),
        );
        let dense = graph.add(
            "dense",
            Layer::Dense(Dense::new(
                "dense",
                feature_len,
                config.dense_units,
                config.conv_activation,
                config.l2,
                &mut init_rng(seed, "dense"),
            )),
            NodeInput::Node(drop),
        );
        graph.add(
            "output",
            Layer::Output(Output::new(
                "output",
                config.dense_units,
                config.output_activation,
                &mut init_rng(seed, "output"),
            )),
            NodeInput::Node(dense),
        );
        Ok(Model { config, graph })
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn graph(&self) -> &Graph<F> {
        &self.graph
    }

    pub fn graph_mut(&mut self) -> &mut Graph<F> {
        &mut self.graph
    }

    /// Probability of the positive class for one document matrix, with
    /// dropout inactive. Deterministic for a given model and input.
    pub fn predict(&self, doc: &Tensor<F>) -> Result<F, NnError> {
        let expected = [self.config.doc_length, self.config.embed_dim];
        if doc.shape() != expected {
            return Err(NnError::ShapeMismatch {
                expected: expected.to_vec(),
                got: doc.shape().to_vec(),
            });
        }
        let record = self.graph.forward(doc.clone(), Mode::Infer, None)?;
        Ok(self.graph.output(&record).data()[0])
    }

    /// Per-layer name, output shape and parameter count, in graph order.
    /// Shapes come from the same algebra the forward pass checks against,
    /// so they always match runtime shapes.
    pub fn summary(&self) -> Vec<LayerSummary> {
        self.graph
            .summary(&[self.config.doc_length, self.config.embed_dim])
            .expect("shapes were validated when the model was built")
    }

    /// Tab-separated summary: one line per layer (name, shape, parameter
    /// count) and a closing total line.
    pub fn summary_text(&self) -> String {
        let rows = self.summary();
        let mut out = String::new();
        for row in &rows {
            let dims: Vec<String> = row.output_shape.iter().map(|d| d.to_string()).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                row.name,
                dims.join("x"),
                row.param_count
            ));
        }
        out.push_str(&format!("total\t\t{}\n", self.graph.param_count()));
        out
    }
}

/// Builds the basic or pyramid branches and returns the flattened feature
/// length feeding the dense layer. Branch k applies k-gram kernels in
/// every one of its depth/2 rounds; rounds after the first convolve over
/// m channels. The pyramid variant downsamples with strided convs in all
/// rounds but the last, which keeps its max-pool.
fn branch_stacks<F: Scalar>(
    config: &ArchitectureConfig,
    seed: u64,
    graph: &mut Graph<F>,
) -> Result<usize, ArchError> {
    let rounds = config.depth / 2;
    let mut tails = Vec::with_capacity(config.width);
    let mut feature_len = 0;
    for k in 1..=config.width {
        let mut input = NodeInput::Source;
        let mut len = config.doc_length;
        let mut channels = config.embed_dim;
        for j in 1..=rounds {
            let name = format!("b{k}.conv{j}");
            len = conv_out(len, k, 1, &name)?;
            let conv = Conv1d::new(
                &name,
                k,
                channels,
                config.filters,
                1,
                config.conv_activation,
                &mut init_rng(seed, &name),
            );
            let idx = graph.add(name, Layer::Conv1d(conv), input);
            channels = config.filters;
            let last_round = j == rounds;
            let down = if config.variant == Variant::Pyramid && !last_round {
                let name = format!("b{k}.down{j}");
                len = conv_out(len, k, config.stride, &name)?;
                let conv = Conv1d::new(
                    &name,
                    k,
                    channels,
                    config.filters,
                    config.stride,
                    config.conv_activation,
                    &mut init_rng(seed, &name),
                );
                graph.add(name, Layer::Conv1d(conv), NodeInput::Node(idx))
            } else {
                len = len.div_ceil(config.pool_region);
                graph.add(
                    format!("b{k}.pool{j}"),
                    Layer::MaxPool(MaxPool::new(config.pool_region)),
                    NodeInput::Node(idx),
                )
            };
            input = NodeInput::Node(down);
        }
        let NodeInput::Node(tail) = input else {
            unreachable!("every branch has at least one round")
        };
        tails.push(tail);
        feature_len += len * config.filters;
    }
    graph.add(
        "merge",
        Layer::Concat(ConcatKind::Flatten),
        NodeInput::Many(tails),
    );
    Ok(feature_len)
}

/// Builds the fluctuating trunk: each round fans out into W parallel
/// convs over the shared input, truncates them to the shortest map,
/// concatenates channel-wise to W*m channels and contracts through one
/// pool. Returns the flattened feature length.
fn fluctuating_stacks<F: Scalar>(
    config: &ArchitectureConfig,
    seed: u64,
    graph: &mut Graph<F>,
) -> Result<usize, ArchError> {
    let rounds = config.depth / 2;
    let mut input = NodeInput::Source;
    let mut len = config.doc_length;
    let mut channels = config.embed_dim;
    for j in 1..=rounds {
        let mut fan = Vec::with_capacity(config.width);
        for k in 1..=config.width {
            let name = format!("s{j}.conv.k{k}");
            conv_out(len, k, 1, &name)?;
            let conv = Conv1d::new(
                &name,
                k,
                channels,
                config.filters,
                1,
                config.conv_activation,
                &mut init_rng(seed, &name),
            );
            fan.push(graph.add(name, Layer::Conv1d(conv), input.clone()));
        }
        // The widest kernel produces the shortest map; concatenation
        // truncates every branch down to it.
        len = len - config.width + 1;
        let merge = graph.add(
            format!("s{j}.merge"),
            Layer::Concat(ConcatKind::Channel),
            NodeInput::Many(fan),
        );
        channels = config.width * config.filters;
        len = len.div_ceil(config.pool_region);
        let pool = graph.add(
            format!("s{j}.pool"),
            Layer::MaxPool(MaxPool::new(config.pool_region)),
            NodeInput::Node(merge),
        );
        input = NodeInput::Node(pool);
    }
    let NodeInput::Node(tail) = input else {
        unreachable!("depth >= 2 guarantees at least one round")
    };
    graph.add(
        "flatten",
        Layer::Concat(ConcatKind::Flatten),
        NodeInput::Node(tail),
    );
    Ok(len * channels)
}

fn conv_out(len: usize, kernel: usize, stride: usize, stack: &str) -> Result<usize, ArchError> {
    if len < kernel {
        return Err(ArchError::StackUnderflow {
            stack: stack.to_string(),
            input: len,
            kernel,
        });
    }
    Ok((len - kernel) / stride + 1)
}

/// Smallest pool region R >= 2 whose final feature-map length for the
/// widest kernel lands in the preferred band; if no region does, the
/// feasible region whose final length is closest to the band midpoint,
/// ties toward smaller R. Regions that empty any stack are infeasible.
pub fn suggest_pool_region(n: usize, k_max: usize, depth: usize) -> Result<usize, ArchError> {
    assert!(n > k_max, "document length must exceed the widest kernel");
    assert!(depth >= 2 && depth % 2 == 0, "depth must be even");
    let final_len = |r: usize| -> Option<usize> {
        let mut len = n;
        for _ in 0..depth / 2 {
            if len < k_max {
                return None;
            }
            len = (len - k_max + 1).div_ceil(r);
        }
        Some(len)
    };
    let target = (POOLED_LEN_LO + POOLED_LEN_HI) / 2;
    let mut fallback: Option<(usize, usize)> = None;
    for r in 2..=n {
        let Some(len) = final_len(r) else { continue };
        if (POOLED_LEN_LO..=POOLED_LEN_HI).contains(&len) {
            return Ok(r);
        }
        let dist = len.abs_diff(target);
        if fallback.is_none_or(|(best, _)| dist < best) {
            fallback = Some((dist, r));
        }
    }
    match fallback {
        Some((_, r)) => Ok(r),
        None => Err(ArchError::NoFeasibleRegion {
            doc_length: n,
            kernel: k_max,
            depth,
        }),
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint config is invalid: {0}")]
    BadConfig(#[from] serde_json::Error),
    #[error("checkpoint config does not build: {0}")]
    UnbuildableConfig(#[from] ArchError),
    #[error("checkpoint ends inside parameter `{0}`")]
    TruncatedParameter(String),
    #[error("expected parameter `{expected}`, found `{found}`")]
    ParameterName { expected: String, found: String },
    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    ParameterShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint has trailing bytes after the last parameter")]
    TrailingBytes,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Model<f32> {
    /// Writes the binary checkpoint: magic, format version, JSON config,
    /// then every parameter in graph order as name, rank, dims and
    /// little-endian 32-bit values. Round-trips bit-exactly.
    pub fn save(&self, mut sink: impl Write) -> Result<(), CheckpointError> {
        sink.write_all(&CHECKPOINT_MAGIC)?;
        sink.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let config = serde_json::to_vec(&self.config)?;
        sink.write_all(&(config.len() as u32).to_le_bytes())?;
        sink.write_all(&config)?;
        for param in self.graph.parameters() {
            let name = param.name.as_bytes();
            sink.write_all(&(name.len() as u16).to_le_bytes())?;
            sink.write_all(name)?;
            let shape = param.value.shape();
            sink.write_all(&[shape.len() as u8])?;
            for &dim in shape {
                sink.write_all(&(dim as u32).to_le_bytes())?;
            }
            for &v in param.value.data() {
                sink.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Rebuilds the model a checkpoint was saved from, bit for bit.
    pub fn load(mut source: impl Read) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        source
            .read_exact(&mut magic)
            .map_err(|_| CheckpointError::BadMagic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut source).map_err(|_| CheckpointError::BadMagic)?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let config_len = read_u32(&mut source)? as usize;
        let mut config_bytes = vec![0u8; config_len];
        source.read_exact(&mut config_bytes)?;
        let config: ArchitectureConfig = serde_json::from_slice(&config_bytes)?;
        // The parameter blobs overwrite every value, so the build seed is
        // irrelevant here.
        let mut model = Model::build(config, 0)?;
        for param in model.graph.parameters_mut() {
            let truncated = || CheckpointError::TruncatedParameter(param.name.clone());
            let mut len_bytes = [0u8; 2];
            source.read_exact(&mut len_bytes).map_err(|_| truncated())?;
            let mut name = vec![0u8; u16::from_le_bytes(len_bytes) as usize];
            source.read_exact(&mut name).map_err(|_| truncated())?;
            let found = String::from_utf8_lossy(&name).into_owned();
            if found != param.name {
                return Err(CheckpointError::ParameterName {
                    expected: param.name.clone(),
                    found,
                });
            }
            let mut rank = [0u8; 1];
            source.read_exact(&mut rank).map_err(|_| truncated())?;
            let mut found_shape = Vec::with_capacity(rank[0] as usize);
            for _ in 0..rank[0] {
                found_shape.push(read_u32(&mut source).map_err(|_| truncated())? as usize);
            }
            if found_shape != param.value.shape() {
                return Err(CheckpointError::ParameterShape {
                    name: param.name.clone(),
                    expected: param.value.shape().to_vec(),
                    found: found_shape,
                });
            }
            for slot in param.value.data_mut() {
                let mut v = [0u8; 4];
                source.read_exact(&mut v).map_err(|_| truncated())?;
                *slot = f32::from_le_bytes(v);
            }
        }
        if source.read(&mut [0u8; 1])? != 0 {
            return Err(CheckpointError::TrailingBytes);
        }
        Ok(model)
    }
}

fn read_u32(source: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    source.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
