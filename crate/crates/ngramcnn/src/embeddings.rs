//! Pretrained word-vector tables, document matrices and vector
//! arithmetic, plus the closed-form training-cost estimators for the two
//! classic embedding objectives.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::nn::{Scalar, Tensor};
use crate::rng::rng_for;
use crate::textprep::{PaddedDocument, PAD_INDEX, UNK_INDEX};

/// Seed material for the shared out-of-vocabulary vector. Every table of
/// a given dimension derives the same OOV vector from this purpose
/// string, so runs are reproducible across processes.
pub const OOV_SEED: u64 = 0;
pub const OOV_PURPOSE: &str = "embeddings.oov";

/// An n x d document matrix: row i is the vector of token i. Pad rows are
/// all-zero; unknown-token rows equal the table's fixed OOV vector.
pub type DocumentMatrix<F> = Tensor<F>;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("line {line}: expected a token and at least one value, found {found} fields")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: `{value}` is not a number")]
    BadNumber { line: usize, value: String },
    #[error("line {line}: vector has {found} values but the table dimension is {expected}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding file contains no vectors")]
    Empty,
    #[error("token `{0}` is not in the vocabulary")]
    MissingToken(String),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A vocabulary-to-vector map of fixed dimension, immutable after load.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vocab: HashMap<String, usize>,
    /// Row order equals file order; this is the vocabulary order used for
    /// tie-breaking in ranked queries.
    order: Vec<String>,
    /// Row-major |V| x dim values.
    matrix: Vec<f32>,
    oov: Vec<f32>,
}

impl EmbeddingTable {
    /// Parses the text word-vector format: one entry per line, the token
    /// followed by d space-separated decimals. A first line of exactly two
    /// integer fields is treated as a "count dim" header and skipped.
    /// Duplicate tokens keep their first occurrence; `limit` stops after
    /// that many entries.
    pub fn load(reader: impl BufRead, limit: Option<usize>) -> Result<Self, EmbedError> {
        let mut dim = 0usize;
        let mut vocab = HashMap::new();
        let mut order = Vec::new();
        let mut matrix = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let trimmed = line.trim_end_matches(['\n', '\r']);
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(' ').collect();
            if i == 0
                && fields.len() == 2
                && fields.iter().all(|f| f.parse::<u64>().is_ok())
            {
                continue;
            }
            if fields.len() < 2 {
                return Err(EmbedError::FieldCount {
                    line: lineno,
                    found: fields.len(),
                });
            }
            let token = fields[0];
            let values = &fields[1..];
            if dim == 0 {
                dim = values.len();
            } else if values.len() != dim {
                return Err(EmbedError::DimMismatch {
                    line: lineno,
                    expected: dim,
                    found: values.len(),
                });
            }
            if vocab.contains_key(token) {
                continue;
            }
            let start = matrix.len();
            for v in values {
                matrix.push(v.parse::<f32>().map_err(|_| EmbedError::BadNumber {
                    line: lineno,
                    value: v.to_string(),
                })?);
            }
            debug_assert_eq!(matrix.len() - start, dim);
            vocab.insert(token.to_string(), order.len());
            order.push(token.to_string());
            if limit.is_some_and(|l| order.len() >= l) {
                break;
            }
        }
        if order.is_empty() {
            return Err(EmbedError::Empty);
        }
        Ok(Self::assemble(dim, vocab, order, matrix))
    }

    /// Builds a table directly from (token, vector) rows; duplicates keep
    /// the first occurrence.
    pub fn from_rows(
        dim: usize,
        rows: impl IntoIterator<Item = (String, Vec<f32>)>,
    ) -> Result<Self, EmbedError> {
        let mut vocab = HashMap::new();
        let mut order = Vec::new();
        let mut matrix = Vec::new();
        for (token, values) in rows {
            if values.len() != dim {
                return Err(EmbedError::DimMismatch {
                    line: order.len() + 1,
                    expected: dim,
                    found: values.len(),
                });
            }
            if vocab.contains_key(&token) {
                continue;
            }
            matrix.extend_from_slice(&values);
            vocab.insert(token.clone(), order.len());
            order.push(token);
        }
        if order.is_empty() {
            return Err(EmbedError::Empty);
        }
        Ok(Self::assemble(dim, vocab, order, matrix))
    }

    fn assemble(
        dim: usize,
        vocab: HashMap<String, usize>,
        order: Vec<String>,
        matrix: Vec<f32>,
    ) -> Self {
        use rand::Rng;
        let mut rng = rng_for(OOV_SEED, OOV_PURPOSE);
        let oov = (0..dim)
            .map(|_| rng.random_range(-0.25f64..=0.25) as f32)
            .collect();
        EmbeddingTable {
            dim,
            vocab,
            order,
            matrix,
            oov,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Row index of a token in the table.
    pub fn row_of(&self, token: &str) -> Option<usize> {
        self.vocab.get(token).copied()
    }

    /// Vocabulary index used in padded documents: row + 2, leaving room
    /// for the reserved pad and unknown indices.
    pub fn doc_index(&self, token: &str) -> Option<usize> {
        self.row_of(token).map(|r| r + 2)
    }

    pub fn token(&self, row: usize) -> &str {
        &self.order[row]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.matrix[row * self.dim..(row + 1) * self.dim]
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.row_of(token).map(|r| self.row(r))
    }

    /// The fixed vector shared by all unknown tokens.
    pub fn oov_vector(&self) -> &[f32] {
        &self.oov
    }

    /// Scales every row (and the OOV vector) to unit L2 norm; all-zero
    /// rows are left untouched.
    pub fn l2_normalize(&mut self) {
        for r in 0..self.order.len() {
            normalize_slice(&mut self.matrix[r * self.dim..(r + 1) * self.dim]);
        }
        normalize_slice(&mut self.oov);
    }

    /// Serializes back to the text format, one row per line in table
    /// order. Values print in shortest round-trip form.
    pub fn write_text(&self, mut writer: impl Write) -> Result<(), EmbedError> {
        for r in 0..self.order.len() {
            write!(writer, "{}", self.order[r])?;
            for v in self.row(r) {
                write!(writer, " {v}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}

fn normalize_slice(v: &mut [f32]) {
    let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
}

/// Builds the n x d matrix for a padded document: pad rows are zero,
/// unknown rows take the table's OOV vector, vocabulary rows copy the
/// table row exactly (widening to F is value-preserving).
pub fn embed<F: Scalar>(doc: &PaddedDocument, table: &EmbeddingTable) -> DocumentMatrix<F> {
    let n = doc.token_ids.len();
    let d = table.dim;
    let mut out = Tensor::zeros(vec![n, d]);
    for (i, &id) in doc.token_ids.iter().enumerate() {
        let src: &[f32] = match id {
            PAD_INDEX => continue,
            UNK_INDEX => &table.oov,
            _ => table.row(id - 2),
        };
        let row = &mut out.data_mut()[i * d..(i + 1) * d];
        for (o, &v) in row.iter_mut().zip(src) {
            *o = F::from_f64(f64::from(v));
        }
    }
    out
}

/// Cosine of the angle between two vectors, accumulated at f64.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::LengthMismatch(a.len(), b.len()));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Ranks the table by cosine to vec(b) - vec(a) + vec(c), excluding a, b
/// and c themselves. Ties break by vocabulary (row) order. Rows whose
/// cosine is undefined (all-zero) are skipped.
pub fn analogy(
    a: &str,
    b: &str,
    c: &str,
    k: usize,
    table: &EmbeddingTable,
) -> Result<Vec<(String, f64)>, EmbedError> {
    let va = table
        .vector(a)
        .ok_or_else(|| EmbedError::MissingToken(a.to_string()))?;
    let vb = table
        .vector(b)
        .ok_or_else(|| EmbedError::MissingToken(b.to_string()))?;
    let vc = table
        .vector(c)
        .ok_or_else(|| EmbedError::MissingToken(c.to_string()))?;
    let target: Vec<f32> = (0..table.dim)
        .map(|i| vb[i] - va[i] + vc[i])
        .collect();
    if target.iter().all(|&x| x == 0.0) {
        return Err(EmbedError::ZeroVector);
    }
    let mut ranked: Vec<(usize, f64)> = Vec::new();
    for r in 0..table.len() {
        let t = table.token(r);
        if t == a || t == b || t == c {
            continue;
        }
        if let Ok(score) = cosine(&target, table.row(r)) {
            ranked.push((r, score));
        }
    }
    ranked.sort_by(|(ra, sa), (rb, sb)| sb.partial_cmp(sa).unwrap().then(ra.cmp(rb)));
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(r, s)| (table.token(r).to_string(), s))
        .collect())
}

/// Inputs to the training-cost estimators. `window` is Q for the
/// bag-of-words objective and the word window for the skip-gram one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingCostInputs {
    pub epochs: u64,
    pub tokens: u64,
    pub window: u64,
    pub projection: u64,
    pub vocab: u64,
}

impl TrainingCostInputs {
    fn check(&self) {
        assert!(
            self.epochs >= 1
                && self.tokens >= 1
                && self.window >= 1
                && self.projection >= 1
                && self.vocab >= 2,
            "cost inputs must be positive with vocab >= 2"
        );
    }
}

fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

/// E x T x (Q x P + P x log2(V)), rounded half-up.
pub fn cbow_cost(i: &TrainingCostInputs) -> u64 {
    i.check();
    let per_token =
        (i.window * i.projection) as f64 + i.projection as f64 * (i.vocab as f64).log2();
    round_half_up((i.epochs * i.tokens) as f64 * per_token)
}

/// E x T x (win x (P + P x log2(V))), rounded half-up.
pub fn skipgram_cost(i: &TrainingCostInputs) -> u64 {
    i.check();
    let per_token =
        i.window as f64 * (i.projection as f64 + i.projection as f64 * (i.vocab as f64).log2());
    round_half_up((i.epochs * i.tokens) as f64 * per_token)
}
