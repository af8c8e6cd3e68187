//! mdbook renders the chapters but cannot run their code against this
//! workspace's crates. Including each chapter as a doc comment makes
//! `cargo test --doc` compile and run every code block, so the book
//! cannot drift away from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/preparing-text.md")]
pub mod preparing_text {}

#[doc = include_str!("../../../book/src/word-vectors.md")]
pub mod word_vectors {}

#[doc = include_str!("../../../book/src/differentiable-engine.md")]
pub mod differentiable_engine {}

#[doc = include_str!("../../../book/src/convolution-networks.md")]
pub mod convolution_networks {}

#[doc = include_str!("../../../book/src/training-and-evaluation.md")]
pub mod training_and_evaluation {}

#[doc = include_str!("../../../book/src/affect-lexicons.md")]
pub mod affect_lexicons {}

#[doc = include_str!("../../../book/src/tag-folksonomies.md")]
pub mod tag_folksonomies {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}
