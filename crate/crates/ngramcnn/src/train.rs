//! Corpus splitting, mini-batch training, evaluation, and the tf-idf
//! plus logistic-regression baseline.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::Model;
use crate::embeddings::{embed, EmbeddingTable};
use crate::nn::{bce_grad, bce_loss, AdamParams, Mode, NnError, Scalar, Tensor};
use crate::rng::{derive_seed_indexed, rng_for};
use crate::textprep::{PaddedDocument, Polarity, TokenSequence};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("split fractions must be positive and sum to 1, and every part must be non-empty")]
    DegenerateFraction,
    #[error("corpus has {0} documents; splitting needs at least 10")]
    CorpusTooSmall(usize),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("{part} document {index} has {found} tokens, the model expects {expected}")]
    DocLength {
        part: &'static str,
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding table dimension {found} does not match the model's {expected}")]
    EmbedDim { expected: usize, found: usize },
    #[error("feature {index} of sample {sample} is not finite")]
    NonFiniteFeature { sample: usize, index: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Fractional corpus split. The default mirrors the usual 70/10/20
/// train/dev/test arrangement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.70,
            dev: 0.10,
            test: 0.20,
            seed: 0,
        }
    }
}

/// Positions into the original corpus, each in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles with the configured seed and partitions by the fractions, with the
/// train part absorbing the rounding remainder. The split is stratified:
/// dev and test receive the label counts closest to the corpus
/// proportions (within half a document each), which keeps every part
/// within five points of the corpus label share once dev holds at least
/// ten documents.
pub fn split(labels: &[Polarity], spec: &SplitSpec) -> Result<SplitIndices, TrainError> {
    let n = labels.len();
    if n < 10 {
        return Err(TrainError::CorpusTooSmall(n));
    }
    let fractions = [spec.train, spec.dev, spec.test];
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(TrainError::DegenerateFraction);
    }
    let dev_n = (spec.dev * n as f64).floor() as usize;
    let test_n = (spec.test * n as f64).floor() as usize;
    let train_n = n - dev_n - test_n;
    if dev_n == 0 || test_n == 0 || train_n == 0 {
        return Err(TrainError::DegenerateFraction);
    }

    let positives = labels.iter().filter(|l| **l == Polarity::Positive).count();
    // Round each quota part_size * positives / n to the nearest integer
    // (half up), in exact integer arithmetic.
    let round_quota = |part: usize| (2 * part * positives + n) / (2 * n);
    let mut pos_dev = round_quota(dev_n);
    let mut pos_test = round_quota(test_n);
    // Rounding both down or both up can leave the train remainder out of
    // range by at most one document; repair from the test part first.
    loop {
        let spill = (pos_dev + pos_test) as isize - positives as isize;
        let pos_train = positives as isize - (pos_dev + pos_test) as isize;
        if spill > 0 {
            if pos_test > 0 {
                pos_test -= 1;
            } else {
                pos_dev -= 1;
            }
        } else if pos_train > train_n as isize {
            if pos_test < test_n {
                pos_test += 1;
            } else {
                pos_dev += 1;
            }
        } else {
            break;
        }
    }
    let pos_train = positives - pos_dev - pos_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(spec.seed, "split.shuffle"));

    // Remaining capacity per (part, class); each document goes to the
    // first part that still needs its class.
    let mut remaining = [
        [pos_train, train_n - pos_train],
        [pos_dev, dev_n - pos_dev],
        [pos_test, test_n - pos_test],
    ];
    let mut parts: [Vec<usize>; 3] = [
        Vec::with_capacity(train_n),
        Vec::with_capacity(dev_n),
        Vec::with_capacity(test_n),
    ];
    for idx in order {
        let class = match labels[idx] {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
        };
        let part = (0..3)
            .find(|&p| remaining[p][class] > 0)
            .expect("class quotas sum to the class totals");
        remaining[part][class] -= 1;
        parts[part].push(idx);
    }
    let [train, dev, test] = parts;
    Ok(SplitIndices { train, dev, test })
}

/// Mini-batch training settings. `deterministic` fixes the gradient
/// reduction order; the trainer runs samples sequentially either way, so
/// equal seeds always reproduce runs bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub hp: AdamParams,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 60,
            epochs: 1,
            hp: AdamParams::default(),
            seed: 0,
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

/// Renders history in the epoch,train_loss,dev_accuracy CSV layout.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,dev_accuracy\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{}\n",
            row.epoch, row.train_loss, row.dev_accuracy
        ));
    }
    out
}

/// Runs mini-batch gradient descent with the Adam update, shuffling the
/// training set with a fresh per-epoch seed and keeping the last partial
/// batch. The reported loss is the mean cross-entropy over the epoch's
/// samples; the dense weight penalty steers the gradients but is not
/// added to the report.
pub fn train<F: Scalar>(
    model: &mut Model<F>,
    table: &EmbeddingTable,
    train_docs: &[(PaddedDocument, Polarity)],
    dev_docs: &[(PaddedDocument, Polarity)],
    config: &TrainConfig,
) -> Result<Vec<EpochStats>, TrainError> {
    if config.epochs < 1 {
        return Err(TrainError::BadConfig("epochs must be at least 1".into()));
    }
    if config.batch_size < 1 {
        return Err(TrainError::BadConfig(
            "batch_size must be at least 1".into(),
        ));
    }
    if train_docs.is_empty() || dev_docs.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    check_docs(model, table, train_docs, "train")?;
    check_docs(model, table, dev_docs, "dev")?;

    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_docs.len()).collect();
    for epoch in 1..=config.epochs {
        let e = epoch as u64;
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed_indexed(
            config.seed,
            "train.shuffle",
            &[e],
        )));
        let mut drop_rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(
            config.seed,
            "train.dropout",
            &[e],
        ));
        let mut loss_sum = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            model.graph_mut().zero_grads();
            for &i in batch {
                let (doc, label) = &train_docs[i];
                let input = embed::<F>(doc, table);
                let record = model
                    .graph()
                    .forward(input, Mode::Train, Some(&mut drop_rng))?;
                let p = model.graph().output(&record).data()[0];
                let target = F::from_f64(label.target());
                let loss = bce_loss(p, target).to_f64();
                if !loss.is_finite() {
                    return Err(TrainError::Nn(NnError::NonFiniteLoss(loss)));
                }
                loss_sum += loss;
                let grad = Tensor::new(vec![1], vec![bce_grad(p, target)]);
                model.graph_mut().backward(&record, grad)?;
            }
            let scale = F::from_f64(1.0 / batch.len() as f64);
            model.graph_mut().scale_grads(scale);
            model.graph_mut().apply_l2_gradients();
            model.graph_mut().adam_step_all(&config.hp);
        }
        let metrics = evaluate(model, table, dev_docs)?;
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_docs.len() as f64,
            dev_accuracy: metrics.accuracy,
        });
    }
    Ok(history)
}

fn check_docs<F: Scalar>(
    model: &Model<F>,
    table: &EmbeddingTable,
    docs: &[(PaddedDocument, Polarity)],
    part: &'static str,
) -> Result<(), TrainError> {
    let expected = model.config().embed_dim;
    if table.dim() != expected {
        return Err(TrainError::EmbedDim {
            expected,
            found: table.dim(),
        });
    }
    let expected = model.config().doc_length;
    for (index, (doc, _)) in docs.iter().enumerate() {
        if doc.token_ids.len() != expected {
            return Err(TrainError::DocLength {
                part,
                index,
                expected,
                found: doc.token_ids.len(),
            });
        }
    }
    Ok(())
}

/// Classification quality at the 0.5 probability threshold, plus the
/// mean cross-entropy. Serializes to the flat JSON metrics layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub loss: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Folds predicted probabilities against gold labels; probability at
/// least 0.5 counts as a positive call.
pub fn compute_metrics(
    outcomes: impl IntoIterator<Item = (f64, Polarity)>,
) -> Result<Metrics, TrainError> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    let mut loss_sum = 0.0f64;
    let mut count = 0u64;
    for (p, gold) in outcomes {
        let called_positive = p >= 0.5;
        match (called_positive, gold) {
            (true, Polarity::Positive) => tp += 1,
            (true, Polarity::Negative) => fp += 1,
            (false, Polarity::Negative) => tn += 1,
            (false, Polarity::Positive) => fn_ += 1,
        }
        loss_sum += bce_loss(p, gold.target());
        count += 1;
    }
    if count == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    Ok(Metrics {
        accuracy: (tp + tn) as f64 / count as f64,
        loss: loss_sum / count as f64,
        tp,
        fp,
        tn,
        fn_,
    })
}

/// Evaluates the model over a labeled set in infer mode.
pub fn evaluate<F: Scalar>(
    model: &Model<F>,
    table: &EmbeddingTable,
    docs: &[(PaddedDocument, Polarity)],
) -> Result<Metrics, TrainError> {
    check_docs(model, table, docs, "test")?;
    let mut outcomes = Vec::with_capacity(docs.len());
    for (doc, label) in docs {
        let p = model.predict(&embed::<F>(doc, table))?;
        outcomes.push((p.to_f64(), *label));
    }
    compute_metrics(outcomes)
}

/// Vocabulary with document frequencies, fit once over a corpus.
#[derive(Debug, Clone)]
pub struct TfidfModel {
    vocab: HashMap<String, usize>,
    df: Vec<usize>,
    n_docs: usize,
}

impl TfidfModel {
    pub fn vocab_len(&self) -> usize {
        self.df.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Smoothed inverse document frequency for feature `index`.
    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[index] as f64)).ln() + 1.0
    }
}

/// Assigns feature indices in first-appearance order and counts document
/// frequencies.
pub fn tfidf_fit(corpus: &[TokenSequence]) -> Result<TfidfModel, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut vocab: HashMap<String, usize> = HashMap::new();
    let mut df: Vec<usize> = Vec::new();
    let mut seen_in_doc: Vec<usize> = Vec::new();
    for (doc_i, doc) in corpus.iter().enumerate() {
        for token in &doc.tokens {
            let index = *vocab.entry(token.clone()).or_insert_with(|| {
                df.push(0);
                seen_in_doc.push(usize::MAX);
                df.len() - 1
            });
            if seen_in_doc[index] != doc_i {
                seen_in_doc[index] = doc_i;
                df[index] += 1;
            }
        }
    }
    Ok(TfidfModel {
        vocab,
        df,
        n_docs: corpus.len(),
    })
}

/// Sparse (feature index, weight) pairs, ascending by index, scaled to
/// unit L2 norm. Term weight is count * (ln((1+N)/(1+df)) + 1); tokens
/// unseen at fit time are ignored.
pub fn tfidf_transform(model: &TfidfModel, doc: &TokenSequence) -> Vec<(usize, f64)> {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for token in &doc.tokens {
        if let Some(&index) = model.vocab.get(token) {
            *counts.entry(index).or_insert(0.0) += 1.0;
        }
    }
    let mut vector: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(index, tf)| (index, tf * model.idf(index)))
        .collect();
    vector.sort_by_key(|(index, _)| *index);
    let norm = vector.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut vector {
            *w /= norm;
        }
    }
    vector
}

/// L2-regularized logistic regression weights, with the winning grid
/// value recorded.
#[derive(Debug, Clone)]
pub struct LogregModel {
    pub lambda: f64,
    weights: Vec<f64>,
    bias: f64,
}

pub type SparseVec = Vec<(usize, f64)>;

/// Full-batch gradient descent per grid value, run to gradient norm
/// 1e-5 or 5000 iterations, with the step size set from the loss's
/// curvature bound. The grid winner has the best dev accuracy; ties go
/// to the larger (more regularized) value. The bias is not penalized.
pub fn logreg_train(
    train: &[(SparseVec, Polarity)],
    dev: &[(SparseVec, Polarity)],
    dim: usize,
    grid: &[f64],
) -> Result<LogregModel, TrainError> {
    if train.is_empty() || dev.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if grid.is_empty() || grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(TrainError::BadConfig(
            "regularization grid must be non-empty and non-negative".into(),
        ));
    }
    check_features(train)?;
    check_features(dev)?;
    let mut best: Option<(f64, LogregModel)> = None;
    for &lambda in grid {
        let model = fit_logreg(train, dim, lambda);
        let correct = dev
            .iter()
            .filter(|(x, gold)| {
                let positive = logreg_predict(&model, x) >= 0.5;
                positive == (*gold == Polarity::Positive)
            })
            .count();
        let accuracy = correct as f64 / dev.len() as f64;
        let better = match &best {
            None => true,
            Some((acc, m)) => accuracy > *acc || (accuracy == *acc && lambda > m.lambda),
        };
        if better {
            best = Some((accuracy, model));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

fn check_features(set: &[(SparseVec, Polarity)]) -> Result<(), TrainError> {
    for (sample, (x, _)) in set.iter().enumerate() {
        for (index, value) in x {
            if !value.is_finite() {
                return Err(TrainError::NonFiniteFeature {
                    sample,
                    index: *index,
                });
            }
        }
    }
    Ok(())
}

fn fit_logreg(train: &[(SparseVec, Polarity)], dim: usize, lambda: f64) -> LogregModel {
    let n = train.len() as f64;
    let max_sq = train
        .iter()
        .map(|(x, _)| x.iter().map(|(_, v)| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    // Curvature of the mean log-loss is at most (max ||x||^2 + 1) / 4
    // counting the bias input, plus 2*lambda from the penalty.
    let lr = 1.0 / (0.25 * (max_sq + 1.0) + 2.0 * lambda);
    let mut weights = vec![0.0f64; dim];
    let mut bias = 0.0f64;
    for _ in 0..5000 {
        let mut grad = vec![0.0f64; dim];
        let mut grad_bias = 0.0f64;
        for (x, gold) in train {
            let z = bias + x.iter().map(|(i, v)| weights[*i] * v).sum::<f64>();
            let err = (logistic(z) - gold.target()) / n;
            for (i, v) in x {
                grad[*i] += err * v;
            }
            grad_bias += err;
        }
        for (g, w) in grad.iter_mut().zip(&weights) {
            *g += 2.0 * lambda * w;
        }
        let norm = (grad.iter().map(|g| g * g).sum::<f64>() + grad_bias * grad_bias).sqrt();
        if norm < 1e-5 {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= lr * g;
        }
        bias -= lr * grad_bias;
    }
    LogregModel {
        lambda,
        weights,
        bias,
    }
}

pub fn logreg_predict(model: &LogregModel, features: &SparseVec) -> f64 {
    let z = model.bias
        + features
            .iter()
            .map(|(i, v)| model.weights.get(*i).copied().unwrap_or(0.0) * v)
            .sum::<f64>();
    logistic(z)
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
