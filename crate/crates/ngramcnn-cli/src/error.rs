//! Error type spanning every subcommand, with one documented exit code
//! per error class.

use ngramcnn::arch::{ArchError, CheckpointError};
use ngramcnn::embeddings::EmbedError;
use ngramcnn::lexicon::LexError;
use ngramcnn::nn::NnError;
use ngramcnn::tags::TagError;
use ngramcnn::textprep::TextError;
use ngramcnn::train::TrainError;
use thiserror::Error;

/// Reserved for panics and other unexpected aborts.
pub const EXIT_INTERNAL: i32 = 1;
/// Bad flags or flag combinations (also used by the parser itself).
pub const EXIT_USAGE: i32 = 2;
/// Unreadable or unparsable input files.
pub const EXIT_INPUT: i32 = 3;
/// Invalid configuration, including network shapes that cannot build.
pub const EXIT_CONFIG: i32 = 4;
/// Damaged or incompatible checkpoint files.
pub const EXIT_CHECKPOINT: i32 = 5;
/// Well-formed input whose content breaks a data contract.
pub const EXIT_DATA: i32 = 6;
/// A post-run verification assertion failed.
pub const EXIT_VERIFICATION: i32 = 7;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Internal(String),
}

impl From<ngramcnn::verify::VerifyError> for CliError {
    fn from(e: ngramcnn::verify::VerifyError) -> Self {
        match e {
            ngramcnn::verify::VerifyError::Nn(e) => CliError::Nn(e),
            ngramcnn::verify::VerifyError::Arch(e) => CliError::Arch(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) | CliError::Json(_) => EXIT_INPUT,
            CliError::Text(e) => match e {
                TextError::Json { .. } | TextError::Csv(_) | TextError::Io(_) => EXIT_INPUT,
                _ => EXIT_DATA,
            },
            CliError::Embed(e) => match e {
                EmbedError::FieldCount { .. }
                | EmbedError::BadNumber { .. }
                | EmbedError::DimMismatch { .. }
                | EmbedError::Io(_) => EXIT_INPUT,
                _ => EXIT_DATA,
            },
            CliError::Arch(_) | CliError::Nn(_) => EXIT_CONFIG,
            CliError::Train(e) => match e {
                TrainError::DegenerateFraction
                | TrainError::BadConfig(_)
                | TrainError::Nn(_) => EXIT_CONFIG,
                _ => EXIT_DATA,
            },
            CliError::Checkpoint(_) => EXIT_CHECKPOINT,
            CliError::Lex(e) => match e {
                LexError::Csv(_) | LexError::Io(_) | LexError::Json { .. } => EXIT_INPUT,
                LexError::BadThreshold(_) | LexError::BadStep(_) => EXIT_CONFIG,
                _ => EXIT_DATA,
            },
            CliError::Tag(e) => match e {
                TagError::Json { .. } | TagError::Parse(_) | TagError::Io(_) => EXIT_INPUT,
                _ => EXIT_DATA,
            },
            CliError::Parse(_) => EXIT_INPUT,
            CliError::Data(_) => EXIT_DATA,
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}
