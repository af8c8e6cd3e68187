//! Document cleaning, clipping/padding and corpus file handling.
//!
//! The cleaning pipeline protects a small set of smiley literals, strips
//! HTML tags, lowercases, splits apostrophe forms (keeping residues such
//! as "couldn" and "t"), removes every other non-alphanumeric character,
//! and drops a fixed twelve-word stopword subset. Clipping keeps a
//! document's prefix; padding appends the reserved index 0.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved vocabulary index for pad positions.
pub const PAD_INDEX: usize = 0;
/// Reserved vocabulary index for tokens missing from the vocabulary.
pub const UNK_INDEX: usize = 1;

/// The removed stopword subset. Only these twelve words are dropped;
/// negation and short-form residues ("couldn", "t", "ll", ...) survive.
pub const STOPWORDS: [&str; 12] = [
    "the", "these", "those", "this", "of", "at", "that", "a", "for", "an", "as", "by",
];

/// Smiley literals preserved as single tokens, with the private-use
/// placeholder each one hides behind during cleaning. Longer literals
/// come first so ":-)" is never half-eaten by ":)".
const PROTECTED_SMILEYS: [(&str, char); 6] = [
    (":-)", '\u{E000}'),
    (":-(", '\u{E001}'),
    (":D", '\u{E002}'),
    (":P", '\u{E003}'),
    (":)", '\u{E004}'),
    (":(", '\u{E005}'),
];

static HTML_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());

/// Document polarity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    /// Training target: positive is 1, negative is 0.
    pub fn target(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => 0.0,
        }
    }
}

/// A document as it arrives from a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Polarity>,
}

/// Cleaned, ordered tokens. Every token is lowercase except the protected
/// smiley literals, which are kept verbatim; none is a removed stopword.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A cleaned document with its id and label carried along, as written by
/// the `prep` pipeline: one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanedDocument {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Polarity>,
}

/// Exactly n vocabulary indices; pad indices form a contiguous suffix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddedDocument {
    pub token_ids: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum TextError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: document id is empty")]
    EmptyId { line: usize },
    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: unrecognized label `{value}` (expected positive or negative)")]
    BadLabel { line: usize, value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn is_placeholder(c: char) -> bool {
    ('\u{E000}'..='\u{E005}').contains(&c)
}

/// Cleans arbitrary text into tokens.
///
/// Order matters: HTML tags go first (so "<b>:P</b>" still yields the
/// smiley), then smileys are hidden behind placeholders, then the text is
/// lowercased, apostrophes become spaces (producing the kept residues),
/// every other non-alphanumeric character becomes a space, and stopwords
/// are dropped from the split result. Pre-existing placeholder characters
/// in the input are stripped so they cannot forge a smiley.
pub fn clean(text: &str) -> TokenSequence {
    let no_html = HTML_TAG.replace_all(text, " ");
    let mut s: String = no_html
        .chars()
        .map(|c| if is_placeholder(c) { ' ' } else { c })
        .collect();
    for (literal, placeholder) in PROTECTED_SMILEYS {
        if s.contains(literal) {
            s = s.replace(literal, &format!(" {placeholder} "));
        }
    }
    let s = s.to_lowercase();
    let s: String = s
        .chars()
        .map(|c| match c {
            '\'' | '\u{2019}' => ' ',
            c if c.is_alphanumeric() || is_placeholder(c) => c,
            _ => ' ',
        })
        .collect();
    let tokens = s
        .split_whitespace()
        .filter(|t| !STOPWORDS.contains(t))
        .map(|t| match t.chars().next() {
            Some(c) if is_placeholder(c) => PROTECTED_SMILEYS
                .iter()
                .find(|(_, p)| *p == c)
                .expect("placeholder always maps back")
                .0
                .to_string(),
            _ => t.to_string(),
        })
        .collect();
    TokenSequence { tokens }
}

/// Clips to the first n tokens, maps each through `vocab` (missing tokens
/// become [`UNK_INDEX`]) and pads the tail with [`PAD_INDEX`].
pub fn clip_pad(
    tokens: &TokenSequence,
    n: usize,
    vocab: impl Fn(&str) -> Option<usize>,
) -> PaddedDocument {
    assert!(n >= 1, "padded length must be at least 1");
    let mut token_ids: Vec<usize> = tokens
        .tokens
        .iter()
        .take(n)
        .map(|t| vocab(t).unwrap_or(UNK_INDEX))
        .collect();
    token_ids.resize(n, PAD_INDEX);
    PaddedDocument { token_ids }
}

/// Token-count statistics over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthStats {
    pub min: usize,
    pub mean: f64,
    pub max: usize,
}

pub fn length_stats(corpus: &[TokenSequence]) -> Result<LengthStats, TextError> {
    if corpus.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let lengths = corpus.iter().map(|t| t.len());
    let total: usize = lengths.clone().sum();
    Ok(LengthStats {
        min: lengths.clone().min().unwrap(),
        mean: total as f64 / corpus.len() as f64,
        max: lengths.max().unwrap(),
    })
}

/// Reads a JSON-lines corpus: one {"id", "text", "label"?} object per
/// line. Blank lines are skipped; ids must be non-empty and unique.
pub fn read_corpus_jsonl(reader: impl BufRead) -> Result<Vec<RawDocument>, TextError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument =
            serde_json::from_str(&line).map_err(|source| TextError::Json {
                line: i + 1,
                source,
            })?;
        validate_id(&doc.id, i + 1, &mut seen)?;
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<String>,
}

/// Reads a CSV corpus with header id,text,label. An empty label field
/// means unlabeled.
pub fn read_corpus_csv(reader: impl std::io::Read) -> Result<Vec<RawDocument>, TextError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let row = row?;
        let label = match row.label.as_deref() {
            None | Some("") => None,
            Some("positive") => Some(Polarity::Positive),
            Some("negative") => Some(Polarity::Negative),
            Some(other) => {
                return Err(TextError::BadLabel {
                    line,
                    value: other.to_string(),
                })
            }
        };
        validate_id(&row.id, line, &mut seen)?;
        docs.push(RawDocument {
            id: row.id,
            text: row.text,
            label,
        });
    }
    Ok(docs)
}

fn validate_id(id: &str, line: usize, seen: &mut HashSet<String>) -> Result<(), TextError> {
    if id.is_empty() {
        return Err(TextError::EmptyId { line });
    }
    if !seen.insert(id.to_string()) {
        return Err(TextError::DuplicateId {
            id: id.to_string(),
            line,
        });
    }
    Ok(())
}

/// Writes cleaned documents as JSON lines in input order.
pub fn write_cleaned_jsonl(
    docs: &[CleanedDocument],
    mut writer: impl Write,
) -> Result<(), TextError> {
    for doc in docs {
        serde_json::to_writer(&mut writer, doc).map_err(|source| TextError::Json {
            line: 0,
            source,
        })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads the JSON-lines layout written by [`write_cleaned_jsonl`]. Blank
/// lines are skipped; ids must be non-empty and unique.
pub fn read_cleaned_jsonl(reader: impl BufRead) -> Result<Vec<CleanedDocument>, TextError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CleanedDocument =
            serde_json::from_str(&line).map_err(|source| TextError::Json {
                line: i + 1,
                source,
            })?;
        validate_id(&doc.id, i + 1, &mut seen)?;
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(seq: &TokenSequence) -> Vec<&str> {
        seq.tokens.iter().map(|s| s.as_str()).collect()
    }

    #[test]
    fn html_smiley_and_stopwords_example() {
        let seq = clean("<b>Great :) movie</b> the of");
        assert_eq!(toks(&seq), ["great", ":)", "movie"]);
    }

    #[test]
    fn empty_input_yields_empty_sequence() {
        assert!(clean("").is_empty());
        assert!(clean("   <br/>  ").is_empty());
    }

    #[test]
    fn apostrophe_residues_are_kept() {
        let seq = clean("I couldn't RESIST!!");
        assert_eq!(toks(&seq), ["i", "couldn", "t", "resist"]);
        let seq = clean("she'll don’t");
        assert_eq!(toks(&seq), ["she", "ll", "don", "t"]);
    }

    #[test]
    fn all_six_smileys_survive_verbatim() {
        let seq = clean("ok :-) :-( :D :P :) :( done");
        assert_eq!(toks(&seq), ["ok", ":-)", ":-(", ":D", ":P", ":)", ":(", "done"]);
    }

    #[test]
    fn preexisting_placeholder_characters_cannot_forge_smileys() {
        let seq = clean("x \u{E002} y");
        assert_eq!(toks(&seq), ["x", "y"]);
    }

    #[test]
    fn clip_pad_pads_and_clips() {
        let vocab = |t: &str| match t {
            "a" => Some(5),
            "b" => Some(9),
            "c" => Some(7),
            _ => None,
        };
        let ab = TokenSequence::new(vec!["a".into(), "b".into()]);
        assert_eq!(clip_pad(&ab, 4, vocab).token_ids, [5, 9, 0, 0]);
        let abc = TokenSequence::new(vec!["a".into(), "b".into(), "c".into()]);
        assert_eq!(clip_pad(&abc, 2, vocab).token_ids, [5, 9]);
        let unk = TokenSequence::new(vec!["zzz".into()]);
        assert_eq!(clip_pad(&unk, 2, vocab).token_ids, [UNK_INDEX, 0]);
    }

    #[test]
    fn length_stats_match_hand_counts() {
        let corpus = vec![
            TokenSequence::new(vec!["x".into(); 3]),
            TokenSequence::new(vec!["x".into(); 5]),
        ];
        let stats = length_stats(&corpus).unwrap();
        assert_eq!((stats.min, stats.max), (3, 5));
        assert_eq!(stats.mean, 4.0);

        let single = vec![TokenSequence::new(vec!["x".into(); 7])];
        let stats = length_stats(&single).unwrap();
        assert_eq!((stats.min, stats.max), (7, 7));
        assert_eq!(stats.mean, 7.0);

        assert!(matches!(length_stats(&[]), Err(TextError::EmptyCorpus)));
    }

    #[test]
    fn jsonl_reader_reports_line_numbers_and_duplicates() {
        let good = "{\"id\":\"1\",\"text\":\"fine :)\",\"label\":\"positive\"}\n\n{\"id\":\"2\",\"text\":\"meh\"}\n";
        let docs = read_corpus_jsonl(good.as_bytes()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].label, Some(Polarity::Positive));
        assert_eq!(docs[1].label, None);

        let bad = "{\"id\":\"1\",\"text\":\"x\"}\nnot json\n";
        match read_corpus_jsonl(bad.as_bytes()) {
            Err(TextError::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let dup = "{\"id\":\"1\",\"text\":\"x\"}\n{\"id\":\"1\",\"text\":\"y\"}\n";
        match read_corpus_jsonl(dup.as_bytes()) {
            Err(TextError::DuplicateId { id, line }) => {
                assert_eq!(id, "1");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cleaned_documents_round_trip_through_jsonl() {
        let docs = vec![
            CleanedDocument {
                id: "a".to_string(),
                tokens: vec!["fine".to_string(), ":)".to_string()],
                label: Some(Polarity::Positive),
            },
            CleanedDocument {
                id: "b".to_string(),
                tokens: vec![],
                label: None,
            },
        ];
        let mut bytes = Vec::new();
        write_cleaned_jsonl(&docs, &mut bytes).unwrap();
        let back = read_cleaned_jsonl(bytes.as_slice()).unwrap();
        assert_eq!(back, docs);

        let bad = "{\"id\":\"a\",\"tokens\":[]}\n{\"id\":\"a\",\"tokens\":[]}\n";
        assert!(matches!(
            read_cleaned_jsonl(bad.as_bytes()),
            Err(TextError::DuplicateId { .. })
        ));
    }

    #[test]
    fn csv_reader_parses_labels_and_rejects_junk() {
        let good = "id,text,label\nd1,\"nice, really :)\",positive\nd2,awful,negative\nd3,plain,\n";
        let docs = read_corpus_csv(good.as_bytes()).unwrap();
        assert_eq!(docs.len(), 3);
        assert_eq!(docs[0].text, "nice, really :)");
        assert_eq!(docs[1].label, Some(Polarity::Negative));
        assert_eq!(docs[2].label, None);

        let bad = "id,text,label\nd1,x,meh\n";
        match read_corpus_csv(bad.as_bytes()) {
            Err(TextError::BadLabel { line, value }) => {
                assert_eq!(line, 2);
                assert_eq!(value, "meh");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn is_smiley(t: &str) -> bool {
        PROTECTED_SMILEYS.iter().any(|(lit, _)| *lit == t)
    }

    proptest! {
        /// Re-cleaning the whitespace-joined output changes nothing.
        #[test]
        fn clean_is_idempotent(text in "\\PC{0,120}") {
            let once = clean(&text);
            let twice = clean(&once.tokens.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn no_output_token_is_a_stopword(text in "\\PC{0,120}") {
            for t in &clean(&text).tokens {
                prop_assert!(!STOPWORDS.contains(&t.as_str()));
            }
        }

        /// Lowercase everywhere, except the smiley literals kept verbatim.
        #[test]
        // Some uppercase code points have no lowercase form, so the
        // invariant is that lowercasing the output changes nothing.
        fn non_smiley_tokens_are_lowercase_fixpoints(text in "\\PC{0,120}") {
            for t in &clean(&text).tokens {
                if !is_smiley(t) {
                    prop_assert_eq!(t.to_lowercase(), t.clone(), "token {:?}", t);
                }
            }
        }

        #[test]
        fn clip_pad_output_is_always_exactly_n(
            tokens in proptest::collection::vec("[a-z]{1,6}", 0..40),
            n in 1usize..50,
        ) {
            let seq = TokenSequence::new(tokens);
            let padded = clip_pad(&seq, n, |_| Some(3));
            prop_assert_eq!(padded.token_ids.len(), n);
            // Pads must form a contiguous suffix.
            let first_pad = padded
                .token_ids
                .iter()
                .position(|&i| i == PAD_INDEX)
                .unwrap_or(n);
            prop_assert!(padded.token_ids[first_pad..].iter().all(|&i| i == PAD_INDEX));
        }
    }
}
