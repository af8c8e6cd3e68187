//! Sentiment polarity toolkit built around parallel n-gram convolution
//! networks.
//!
//! The crate has three layers:
//!
//! * data construction: [`textprep`] cleans and pads raw documents,
//!   [`lexicon`] scores texts against valence/arousal norms, and [`tags`]
//!   turns crowd tag tallies into labels and audits the labeling rules;
//! * representation: [`embeddings`] loads pretrained word-vector files and
//!   builds the document matrices the networks consume;
//! * modeling: [`nn`] is a small reverse-mode differentiable engine,
//!   [`arch`] assembles the three network variants on top of it, and
//!   [`train`] runs splits, mini-batch training, evaluation and the
//!   tf-idf/logistic-regression baseline.
//!
//! A rendered guide with worked examples lives in the repository's `book/`
//! directory; the `ngramcnn` binary (crate `ngramcnn-cli`) wires these
//! modules into reproducible pipelines.

pub mod arch;
pub mod embeddings;
pub mod lexicon;
pub mod nn;
pub mod rng;
pub mod tags;
pub mod textprep;
pub mod train;
pub mod verify;

pub use arch::{ArchitectureConfig, Model, Variant};
pub use embeddings::{DocumentMatrix, EmbeddingTable};
pub use lexicon::{AffectLexicon, AffectScore, MoodLabel, QuadrantThresholds};
pub use tags::{Folksonomy, QuadrantCounts, QuadrantLabel, TrackTags};
pub use nn::{Activation, Graph, Tensor};
pub use textprep::{PaddedDocument, Polarity, RawDocument, TokenSequence};
