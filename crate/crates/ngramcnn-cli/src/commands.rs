//! One function per subcommand, each wiring library operations into a
//! pipeline and leaving a run manifest beside whatever it writes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ngramcnn::arch::{ArchitectureConfig, Model};
use ngramcnn::embeddings::{analogy, embed, EmbeddingTable};
use ngramcnn::lexicon::{
    expand_lexicon, polarity, quadrant, read_filter, read_synsets_jsonl, score, AffectLexicon,
    MoodLabel, QuadrantThresholds,
};
use ngramcnn::nn::{Activation, AdamParams, OutputKind, Scalar};
use ngramcnn::tags::{
    agreement, annotate_4q, annotate_pn, count, monotonicity_violations, purity_audit,
    Folksonomy, LabelRule, read_track_tags_jsonl,
};
use ngramcnn::textprep::{
    clean, clip_pad, length_stats, read_cleaned_jsonl, read_corpus_csv, read_corpus_jsonl,
    write_cleaned_jsonl, CleanedDocument, PaddedDocument, Polarity, TextError, TokenSequence,
};
use ngramcnn::train::{
    compute_metrics, history_csv, split, train, SplitSpec, TrainConfig,
};
use ngramcnn::verify::{verify_backprop, TOLERANCE};

use crate::args::{
    AgreeArgs, AnalogyArgs, AnnotateArgs, AuditArgs, Command, EvalArgs, GradcheckArgs, LabelArgs,
    ModeArg, PredictArgs, PrepArgs, PresetArg, TrainArgs,
};
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Prep(args) => prep(&args),
        Command::Train(args) => train_cmd(&args),
        Command::Eval(args) => eval_cmd(&args),
        Command::Predict(args) => predict_cmd(&args),
        Command::Gradcheck(args) => gradcheck_cmd(&args),
        Command::Analogy(args) => analogy_cmd(&args),
        Command::Label(args) => label_cmd(&args),
        Command::Annotate(args) => annotate_cmd(&args),
        Command::Audit(args) => audit_cmd(&args),
        Command::Agree(args) => agree_cmd(&args),
    }
}

fn named_io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| named_io(path, e))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| named_io(path, e))?,
    ))
}

fn load_table(path: &Path, limit: Option<usize>) -> Result<EmbeddingTable, CliError> {
    Ok(EmbeddingTable::load(open(path)?, limit)?)
}

fn pad_against(
    doc: &CleanedDocument,
    n: usize,
    table: &EmbeddingTable,
) -> PaddedDocument {
    clip_pad(&TokenSequence::new(doc.tokens.clone()), n, |t| {
        table.doc_index(t)
    })
}

fn require_label(doc: &CleanedDocument) -> Result<Polarity, CliError> {
    doc.label
        .ok_or_else(|| CliError::Data(format!("document `{}` has no label", doc.id)))
}

fn polarity_name(p: Polarity) -> &'static str {
    match p {
        Polarity::Positive => "positive",
        Polarity::Negative => "negative",
    }
}

fn rule_name(mode: ModeArg) -> &'static str {
    match mode {
        ModeArg::Quadrants => "4q",
        ModeArg::Polarity => "pn",
    }
}

/// Runs inference over documents in input order on a sized worker pool.
fn predict_all(
    model: &Model<f32>,
    table: &EmbeddingTable,
    docs: &[PaddedDocument],
    threads: usize,
) -> Result<Vec<f64>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(format!("worker pool: {e}")))?;
    let probs: Result<Vec<f64>, ngramcnn::nn::NnError> = pool.install(|| {
        docs.par_iter()
            .map(|doc| {
                model
                    .predict(&embed::<f32>(doc, table))
                    .map(|p| p.to_f64())
            })
            .collect()
    });
    Ok(probs?)
}

fn prep(args: &PrepArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("prep");
    manifest.input(&args.input)?;
    let raw = if args.input.extension().is_some_and(|e| e == "csv") {
        read_corpus_csv(open(&args.input)?)?
    } else {
        read_corpus_jsonl(open(&args.input)?)?
    };
    if raw.is_empty() {
        return Err(TextError::EmptyCorpus.into());
    }
    let mut cleaned: Vec<CleanedDocument> = raw
        .iter()
        .map(|doc| CleanedDocument {
            id: doc.id.clone(),
            tokens: clean(&doc.text).tokens,
            label: doc.label,
        })
        .collect();
    if args.stats {
        let seqs: Vec<TokenSequence> = cleaned
            .iter()
            .map(|d| TokenSequence::new(d.tokens.clone()))
            .collect();
        let stats = length_stats(&seqs)?;
        println!(
            "{} documents, token count min {} / mean {:.2} / max {}",
            cleaned.len(),
            stats.min,
            stats.mean,
            stats.max
        );
    }
    if let Some(n) = args.max_len {
        for doc in &mut cleaned {
            doc.tokens.truncate(n);
        }
    }
    let mut writer = create(&args.output)?;
    write_cleaned_jsonl(&cleaned, &mut writer)?;
    writer.flush()?;
    manifest.output(&args.output);
    manifest.write_beside(&args.output)?;
    println!("wrote {} documents to {}", cleaned.len(), args.output.display());
    Ok(())
}

fn preset_name(preset: PresetArg) -> &'static str {
    match preset {
        PresetArg::Sent => "sent",
        PresetArg::Imdb => "imdb",
        PresetArg::Phon => "phon",
        PresetArg::Yelp => "yelp",
        PresetArg::Custom => "custom",
    }
}

/// Turns preset and flag settings into architecture and schedule
/// configurations. Presets fix the architecture, so any structural flag
/// alongside a non-custom preset is a usage error; --epochs and --batch
/// override the preset schedule.
fn resolve_train_config(
    args: &TrainArgs,
    embed_dim: usize,
) -> Result<(ArchitectureConfig, TrainConfig), CliError> {
    let (n, region, preset_epochs) = match args.preset {
        PresetArg::Sent => (30, 2, 3),
        PresetArg::Imdb => (400, 5, 4),
        PresetArg::Phon => (100, 4, 7),
        PresetArg::Yelp => (270, 5, 9),
        PresetArg::Custom => {
            let n = args
                .n
                .ok_or_else(|| CliError::Usage("--preset custom requires --n".into()))?;
            let region = args
                .region
                .ok_or_else(|| CliError::Usage("--preset custom requires --R".into()))?;
            (n, region, 1)
        }
    };
    if args.preset != PresetArg::Custom {
        let structural = [
            ("--n", args.n.is_some()),
            ("--R", args.region.is_some()),
            ("--W", args.width.is_some()),
            ("--L", args.depth.is_some()),
            ("--filters", args.filters.is_some()),
            ("--stride", args.stride.is_some()),
            ("--dense", args.dense.is_some()),
            ("--dropout", args.dropout.is_some()),
            ("--l2", args.l2.is_some()),
        ];
        if let Some((flag, _)) = structural.iter().find(|(_, set)| *set) {
            return Err(CliError::Usage(format!(
                "--preset {} fixes the architecture; {flag} needs --preset custom",
                preset_name(args.preset)
            )));
        }
    }
    let config = ArchitectureConfig {
        variant: args.variant.into(),
        width: args.width.unwrap_or(3),
        depth: args.depth.unwrap_or(4),
        filters: args.filters.unwrap_or(70),
        pool_region: region,
        stride: args.stride.unwrap_or(region),
        doc_length: n,
        embed_dim,
        dense_units: args.dense.unwrap_or(80),
        dropout_rate: args.dropout.unwrap_or(0.35),
        l2: args.l2.unwrap_or(0.1),
        conv_activation: Activation::Relu,
        output_activation: OutputKind::Sigmoid,
    };
    let schedule = TrainConfig {
        batch_size: args.batch.unwrap_or(60),
        epochs: args.epochs.unwrap_or(preset_epochs),
        hp: AdamParams::default(),
        seed: args.seed,
        deterministic: args.deterministic,
    };
    Ok((config, schedule))
}

fn train_cmd(args: &TrainArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("train");
    manifest.seed(args.seed);
    manifest.input(&args.embeddings)?;
    let table = load_table(&args.embeddings, args.limit_vocab)?;

    // Flag validation runs before the corpus is even opened so that a bad
    // invocation reports usage instead of whatever the data contains.
    let (config, schedule) = resolve_train_config(args, table.dim())?;
    let n = config.doc_length;

    manifest.input(&args.data)?;
    let docs = read_cleaned_jsonl(open(&args.data)?)?;
    let labels: Vec<Polarity> = docs.iter().map(require_label).collect::<Result<_, _>>()?;
    let mut model: Model<f32> = Model::build(config, args.seed)?;
    println!("{}", model.summary_text());

    let parts = split(
        &labels,
        &SplitSpec {
            seed: args.seed,
            ..SplitSpec::default()
        },
    )?;
    let gather = |indices: &[usize]| -> Vec<(PaddedDocument, Polarity)> {
        indices
            .iter()
            .map(|&i| (pad_against(&docs[i], n, &table), labels[i]))
            .collect()
    };
    let train_docs = gather(&parts.train);
    let dev_docs = gather(&parts.dev);
    let test_docs = gather(&parts.test);
    println!(
        "split {} train / {} dev / {} test",
        train_docs.len(),
        dev_docs.len(),
        test_docs.len()
    );

    let history = train(&mut model, &table, &train_docs, &dev_docs, &schedule)?;
    for row in &history {
        println!(
            "epoch {}: train loss {:.6}, dev accuracy {:.4}",
            row.epoch, row.train_loss, row.dev_accuracy
        );
    }

    let probs = predict_all(
        &model,
        &table,
        &test_docs.iter().map(|(d, _)| d.clone()).collect::<Vec<_>>(),
        1,
    )?;
    let metrics = compute_metrics(
        probs
            .iter()
            .zip(&test_docs)
            .map(|(&p, (_, gold))| (p, *gold)),
    )?;

    fs::create_dir_all(&args.output_dir).map_err(|e| named_io(&args.output_dir, e))?;
    let model_path = args.output_dir.join("model.ngc");
    let mut sink = create(&model_path)?;
    model.save(&mut sink)?;
    sink.flush()?;
    let history_path = args.output_dir.join("history.csv");
    fs::write(&history_path, history_csv(&history)).map_err(|e| named_io(&history_path, e))?;
    let metrics_path = args.output_dir.join("metrics.json");
    let mut json = serde_json::to_string_pretty(&metrics)?;
    json.push('\n');
    fs::write(&metrics_path, json).map_err(|e| named_io(&metrics_path, e))?;

    manifest.output(&model_path);
    manifest.output(&history_path);
    manifest.output(&metrics_path);
    manifest.write_beside(&args.output_dir)?;
    println!(
        "test accuracy {:.4} over {} documents; artifacts in {}",
        metrics.accuracy,
        test_docs.len(),
        args.output_dir.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<Model<f32>, CliError> {
    Ok(Model::load(open(path)?)?)
}

fn eval_cmd(args: &EvalArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("eval");
    manifest.input(&args.checkpoint)?;
    manifest.input(&args.data)?;
    manifest.input(&args.embeddings)?;

    let model = load_model(&args.checkpoint)?;
    let table = load_table(&args.embeddings, None)?;
    let docs = read_cleaned_jsonl(open(&args.data)?)?;
    let labels: Vec<Polarity> = docs.iter().map(require_label).collect::<Result<_, _>>()?;
    let n = model.config().doc_length;
    if table.dim() != model.config().embed_dim {
        return Err(CliError::Data(format!(
            "embedding dimension {} does not match the checkpoint's {}",
            table.dim(),
            model.config().embed_dim
        )));
    }
    let padded: Vec<PaddedDocument> = docs.iter().map(|d| pad_against(d, n, &table)).collect();
    let probs = predict_all(&model, &table, &padded, args.threads)?;
    let metrics = compute_metrics(probs.iter().zip(&labels).map(|(&p, &gold)| (p, gold)))?;
    let mut json = serde_json::to_string_pretty(&metrics)?;
    json.push('\n');
    print!("{json}");
    if let Some(path) = &args.output {
        fs::write(path, &json).map_err(|e| named_io(path, e))?;
        manifest.output(path);
        manifest.write_beside(path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    id: &'a str,
    probability: f64,
    label: &'static str,
}

fn predict_cmd(args: &PredictArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("predict");
    manifest.input(&args.checkpoint)?;
    manifest.input(&args.data)?;
    manifest.input(&args.embeddings)?;

    let model = load_model(&args.checkpoint)?;
    let table = load_table(&args.embeddings, None)?;
    let docs = read_cleaned_jsonl(open(&args.data)?)?;
    let n = model.config().doc_length;
    let padded: Vec<PaddedDocument> = docs.iter().map(|d| pad_against(d, n, &table)).collect();
    let probs = predict_all(&model, &table, &padded, args.threads)?;

    let mut lines = String::new();
    for (doc, &p) in docs.iter().zip(&probs) {
        let row = PredictionRow {
            id: &doc.id,
            probability: p,
            label: if p >= 0.5 { "positive" } else { "negative" },
        };
        lines.push_str(&serde_json::to_string(&row)?);
        lines.push('\n');
    }
    match &args.output {
        Some(path) => {
            fs::write(path, &lines).map_err(|e| named_io(path, e))?;
            manifest.output(path);
            manifest.write_beside(path)?;
            println!("wrote {} predictions to {}", probs.len(), path.display());
        }
        None => print!("{lines}"),
    }
    Ok(())
}

fn gradcheck_cmd(args: &GradcheckArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("gradcheck");
    manifest.seed(args.seed);
    let report = verify_backprop(args.seed)?;
    for check in &report.checks {
        println!("check {:<12} max relative error {:.3e}", check.name, check.error);
    }
    println!(
        "worst relative error {:.3e} (tolerance {TOLERANCE:.0e})",
        report.worst()
    );
    if let Some(path) = &args.output {
        let body = serde_json::json!({
            "seed": args.seed,
            "tolerance": TOLERANCE,
            "checks": report.checks,
            "worst": report.worst(),
            "passed": report.passed(),
        });
        let mut json = serde_json::to_string_pretty(&body)?;
        json.push('\n');
        fs::write(path, json).map_err(|e| named_io(path, e))?;
        manifest.output(path);
        manifest.write_beside(path)?;
    }
    if !report.passed() {
        return Err(CliError::Verification(format!(
            "worst relative error {:.3e} exceeds {TOLERANCE:.0e}",
            report.worst()
        )));
    }
    println!("backward pass verified");
    Ok(())
}

fn analogy_cmd(args: &AnalogyArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("analogy");
    manifest.input(&args.embeddings)?;
    let table = load_table(&args.embeddings, args.limit_vocab)?;
    let ranked = analogy(&args.a, &args.b, &args.c, args.k, &table)?;
    let mut lines = String::new();
    for (token, cos) in &ranked {
        lines.push_str(&format!("{token}\t{cos:.6}\n"));
    }
    print!("{lines}");
    if let Some(path) = &args.output {
        fs::write(path, &lines).map_err(|e| named_io(path, e))?;
        manifest.output(path);
        manifest.write_beside(path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LabelRow<'a> {
    id: &'a str,
    v: Option<f64>,
    a: Option<f64>,
    hits: usize,
    label: String,
}

fn label_cmd(args: &LabelArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("label");
    manifest.input(&args.input)?;
    manifest.input(&args.lexicon)?;

    let docs = read_cleaned_jsonl(open(&args.input)?)?;
    let mut lexicon = AffectLexicon::read_csv(open(&args.lexicon)?)?;
    if let Some(synsets_path) = &args.synsets {
        let filter_path = args.filter.as_ref().expect("clap enforces --filter");
        manifest.input(synsets_path)?;
        manifest.input(filter_path)?;
        let synsets = read_synsets_jsonl(open(synsets_path)?)?;
        let filter = read_filter(open(filter_path)?)?;
        let before = lexicon.len();
        lexicon = expand_lexicon(&lexicon, &synsets, &filter);
        println!(
            "expanded lexicon from {before} to {} words through {} synsets",
            lexicon.len(),
            synsets.len()
        );
    }
    let thresholds = QuadrantThresholds::new(args.vt, args.at)?;

    let mut lines = String::new();
    let mut labeled = 0usize;
    for doc in &docs {
        let s = score(&TokenSequence::new(doc.tokens.clone()), &lexicon);
        let label = match args.mode {
            ModeArg::Quadrants => quadrant(&s, &thresholds).to_string(),
            ModeArg::Polarity => match polarity(&s, args.vt) {
                Some(p) => polarity_name(p).to_string(),
                None => MoodLabel::Unknown.to_string(),
            },
        };
        if label != MoodLabel::Unknown.to_string() {
            labeled += 1;
        }
        let row = LabelRow {
            id: &doc.id,
            v: s.valence,
            a: s.arousal,
            hits: s.hits,
            label,
        };
        lines.push_str(&serde_json::to_string(&row)?);
        lines.push('\n');
    }
    fs::write(&args.output, &lines).map_err(|e| named_io(&args.output, e))?;
    manifest.output(&args.output);
    manifest.write_beside(&args.output)?;
    println!(
        "labeled {labeled} of {} documents ({} unknown)",
        docs.len(),
        docs.len() - labeled
    );
    Ok(())
}

#[derive(Serialize)]
struct AnnotationRow<'a> {
    track_id: &'a str,
    counts: [usize; 4],
    label: Option<String>,
}

fn annotate_cmd(args: &AnnotateArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("annotate");
    manifest.input(&args.tags)?;
    let tracks = read_track_tags_jsonl(open(&args.tags)?)?;
    let folksonomy = match &args.folksonomy {
        Some(path) => {
            manifest.input(path)?;
            Folksonomy::read_json(open(path)?)?
        }
        None => Folksonomy::default(),
    };

    let mut lines = String::new();
    let mut labeled = 0usize;
    for track in &tracks {
        let counts = count(track, &folksonomy);
        let label = match args.rule {
            ModeArg::Quadrants => annotate_4q(counts).map(|q| q.to_string()),
            ModeArg::Polarity => annotate_pn(counts).map(|p| polarity_name(p).to_string()),
        };
        if label.is_some() {
            labeled += 1;
        }
        let row = AnnotationRow {
            track_id: &track.track_id,
            counts: counts.0,
            label,
        };
        lines.push_str(&serde_json::to_string(&row)?);
        lines.push('\n');
    }
    fs::write(&args.output, &lines).map_err(|e| named_io(&args.output, e))?;
    manifest.output(&args.output);
    manifest.write_beside(&args.output)?;
    println!(
        "rule {} labeled {labeled} of {} tracks",
        rule_name(args.rule),
        tracks.len()
    );
    Ok(())
}

fn audit_cmd(args: &AuditArgs) -> Result<(), CliError> {
    if args.max_total < 20 {
        return Err(CliError::Usage(
            "--max-total below 20 cannot reach every tier".into(),
        ));
    }
    let mut manifest = ManifestBuilder::new("audit");
    let rule: LabelRule = args.rule.into();
    let audit = purity_audit(rule, args.max_total);
    let violations = monotonicity_violations(rule, args.max_total);

    println!(
        "rule {}: enumerated {} count vectors with at most {} tags",
        rule_name(args.rule),
        audit.vectors,
        args.max_total
    );
    for (i, tier) in audit.tiers.iter().enumerate() {
        println!(
            "tier {}: accepted {}, min purity {:.4}, weakest {:?}",
            i + 1,
            tier.accepted,
            tier.min_purity,
            tier.witness.0
        );
    }
    println!("overall minimum purity {:.4}", audit.overall);
    println!("monotonicity violations: {}", violations.len());

    if let Some(path) = &args.output {
        let body = serde_json::json!({
            "audit": audit,
            "monotonicity_violations": violations.len(),
        });
        let mut json = serde_json::to_string_pretty(&body)?;
        json.push('\n');
        fs::write(path, json).map_err(|e| named_io(path, e))?;
        manifest.output(path);
        manifest.write_beside(path)?;
    }
    if !violations.is_empty() {
        return Err(CliError::Verification(format!(
            "{} accepted configurations changed label when their own tag arrived",
            violations.len()
        )));
    }
    Ok(())
}

#[derive(Deserialize)]
struct LabeledRow {
    track_id: String,
    #[serde(default)]
    label: Option<String>,
}

/// Reads annotate-style output, keeping only rows that carry a label.
fn read_label_map(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: LabeledRow = serde_json::from_str(&line).map_err(|e| {
            CliError::Parse(format!("{}: line {}: {e}", path.display(), i + 1))
        })?;
        if let Some(label) = row.label {
            map.insert(row.track_id, label);
        }
    }
    Ok(map)
}

fn agree_cmd(args: &AgreeArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("agree");
    manifest.input(&args.reference)?;
    manifest.input(&args.candidate)?;
    let reference = read_label_map(&args.reference)?;
    let candidate = read_label_map(&args.candidate)?;
    let result = agreement(&reference, &candidate)?;

    print!("label");
    for label in &result.labels {
        print!("\t{label}");
    }
    println!();
    for (label, row) in result.labels.iter().zip(&result.matrix) {
        print!("{label}");
        for cell in row {
            print!("\t{cell}");
        }
        println!();
    }
    println!(
        "overall agreement {:.4} over {} shared ids",
        result.overall, result.shared
    );
    if let Some(path) = &args.output {
        let mut json = serde_json::to_string_pretty(&result)?;
        json.push('\n');
        fs::write(path, json).map_err(|e| named_io(path, e))?;
        manifest.output(path);
        manifest.write_beside(path)?;
    }
    Ok(())
}
