//! Flag definitions for every subcommand.

use clap::{Args, Parser, Subcommand, ValueEnum};
use ngramcnn::arch::Variant;
use ngramcnn::tags::LabelRule;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "ngramcnn",
    version,
    about = "Sentiment polarity pipelines over parallel n-gram convolution networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Clean a raw corpus (CSV or JSON lines) into token JSON lines
    Prep(PrepArgs),
    /// Train a network variant; writes checkpoint, history and metrics
    Train(TrainArgs),
    /// Evaluate a checkpoint against a labeled corpus
    Eval(EvalArgs),
    /// Write per-document probabilities from a checkpoint
    Predict(PredictArgs),
    /// Verify backpropagation against finite differences
    Gradcheck(GradcheckArgs),
    /// Rank analogy completions from an embedding table
    Analogy(AnalogyArgs),
    /// Label documents by lexicon valence/arousal scores
    Label(LabelArgs),
    /// Tally folksonomy tags per track and apply an annotation rule
    Annotate(AnnotateArgs),
    /// Audit an annotation rule's purity by exhaustive enumeration
    Audit(AuditArgs),
    /// Compare two annotation files over their shared ids
    Agree(AgreeArgs),
}

#[derive(Args)]
pub struct PrepArgs {
    /// Raw corpus; .csv parses as id,text,label, anything else as JSON lines
    #[arg(long)]
    pub input: PathBuf,
    /// Cleaned token JSON lines
    #[arg(long)]
    pub output: PathBuf,
    /// Clip every document to this many tokens
    #[arg(long = "max-len")]
    pub max_len: Option<usize>,
    /// Print token-count statistics of the cleaned corpus
    #[arg(long)]
    pub stats: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Basic,
    Pyramid,
    Fluctuating,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Basic => Variant::Basic,
            VariantArg::Pyramid => Variant::Pyramid,
            VariantArg::Fluctuating => Variant::Fluctuating,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    /// Short sentences: n=30, R=2, 3 epochs
    Sent,
    /// Long reviews: n=400, R=5, 4 epochs
    Imdb,
    /// Phone reviews: n=100, R=4, 7 epochs
    Phon,
    /// Business reviews: n=270, R=5, 9 epochs
    Yelp,
    /// Explicit --n and --R
    Custom,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Cleaned token JSON lines with labels
    #[arg(long)]
    pub data: PathBuf,
    /// Word-vector text file
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "basic")]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value = "custom")]
    pub preset: PresetArg,
    /// Padded document length
    #[arg(long)]
    pub n: Option<usize>,
    /// Pooling region length
    #[arg(long = "R")]
    pub region: Option<usize>,
    /// Parallel kernel widths
    #[arg(long = "W")]
    pub width: Option<usize>,
    /// Total conv plus pool stacks
    #[arg(long = "L")]
    pub depth: Option<usize>,
    /// Feature maps per convolution
    #[arg(long)]
    pub filters: Option<usize>,
    /// Downsampling stride for the pyramid variant
    #[arg(long)]
    pub stride: Option<usize>,
    /// Dense layer width
    #[arg(long)]
    pub dense: Option<usize>,
    /// Dropout rate before the dense layer
    #[arg(long)]
    pub dropout: Option<f64>,
    /// L2 penalty on the dense weights
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fix the reduction order (runs are reproducible either way)
    #[arg(long)]
    pub deterministic: bool,
    /// Keep only the first N embedding rows
    #[arg(long = "limit-vocab")]
    pub limit_vocab: Option<usize>,
    /// Directory receiving model.ngc, history.csv, metrics.json
    #[arg(long = "output-dir", default_value = "run")]
    pub output_dir: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Worker threads; 0 picks the machine default
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Also write the metrics JSON here
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Probability JSON lines; stdout when omitted
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report here
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalogyArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Completes "a is to b as c is to ?"
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long)]
    pub c: String,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long = "limit-vocab")]
    pub limit_vocab: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Four mood quadrants
    #[value(name = "4q")]
    Quadrants,
    /// Merged positive/negative
    #[value(name = "pn")]
    Polarity,
}

impl From<ModeArg> for LabelRule {
    fn from(m: ModeArg) -> LabelRule {
        match m {
            ModeArg::Quadrants => LabelRule::Quadrants,
            ModeArg::Polarity => LabelRule::Polarity,
        }
    }
}

#[derive(Args)]
pub struct LabelArgs {
    /// Cleaned token JSON lines
    #[arg(long)]
    pub input: PathBuf,
    /// word,valence,arousal CSV
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Synonym sets for one-hop lexicon expansion
    #[arg(long, requires = "filter")]
    pub synsets: Option<PathBuf>,
    /// Synset ids whose members may enter the expanded lexicon
    #[arg(long)]
    pub filter: Option<PathBuf>,
    /// Valence dead-zone half-width
    #[arg(long, default_value_t = 0.34)]
    pub vt: f64,
    /// Arousal dead-zone half-width
    #[arg(long, default_value_t = 0.34)]
    pub at: f64,
    #[arg(long, value_enum, default_value = "4q")]
    pub mode: ModeArg,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct AnnotateArgs {
    /// Track tag JSON lines: {"track_id": ..., "tags": [...]}
    #[arg(long)]
    pub tags: PathBuf,
    /// Cluster override JSON; the built-in four clusters when omitted
    #[arg(long)]
    pub folksonomy: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub rule: ModeArg,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct AuditArgs {
    #[arg(long, value_enum)]
    pub rule: ModeArg,
    #[arg(long = "max-total", default_value_t = 40)]
    pub max_total: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct AgreeArgs {
    /// Annotation JSON lines taken as the reference labels
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}
