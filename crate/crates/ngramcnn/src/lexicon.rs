//! Affect-lexicon labeling: valence/arousal scoring against word norms,
//! quadrant and polarity assignment with an unknown dead zone, synset
//! expansion of the lexicon, and threshold calibration against gold
//! labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::{Polarity, TokenSequence};

/// Smallest and largest representable word norms (the 1..9 SAM scale).
pub const NORM_LO: f64 = 1.0;
pub const NORM_HI: f64 = 9.0;

/// Calibration stops sweeping once fewer than this many documents
/// receive a directional label.
pub const DEFAULT_CALIBRATION_FLOOR: usize = 50;

#[derive(Debug, Error)]
pub enum LexError {
    #[error("norm {value} for `{word}` is outside [1, 9]")]
    OutOfRange { word: String, value: f64 },
    #[error("{0} is outside the norm scale [1, 9]")]
    RescaleOutOfRange(f64),
    #[error("word `{0}` appears twice")]
    DuplicateWord(String),
    #[error("empty word")]
    EmptyWord,
    #[error("threshold {0} must lie in [0, 4)")]
    BadThreshold(f64),
    #[error("calibration step {0} must be positive and finite")]
    BadStep(f64),
    #[error("gold label {index} is unknown; calibration needs directional gold labels")]
    UnknownGold { index: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no threshold labels enough documents to calibrate against")]
    NothingLabelable,
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Word norms on the 1..9 valence/arousal scale. Words are stored
/// lowercase and unique; insertion normalizes case and trims whitespace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffectLexicon {
    entries: BTreeMap<String, (f64, f64)>,
}

impl AffectLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, valence: f64, arousal: f64) -> Result<(), LexError> {
        let word = word.trim().to_lowercase();
        if word.is_empty() {
            return Err(LexError::EmptyWord);
        }
        for value in [valence, arousal] {
            if !(NORM_LO..=NORM_HI).contains(&value) {
                return Err(LexError::OutOfRange { word, value });
            }
        }
        if self.entries.contains_key(&word) {
            return Err(LexError::DuplicateWord(word));
        }
        self.entries.insert(word, (valence, arousal));
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<(f64, f64)> {
        self.entries.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, (f64, f64))> {
        self.entries.iter().map(|(w, n)| (w.as_str(), *n))
    }

    /// Parses the word,valence,arousal CSV layout (with header).
    pub fn read_csv(reader: impl std::io::Read) -> Result<Self, LexError> {
        #[derive(Deserialize)]
        struct Row {
            word: String,
            valence: f64,
            arousal: f64,
        }
        let mut lexicon = AffectLexicon::new();
        let mut csv_reader = csv::Reader::from_reader(reader);
        for row in csv_reader.deserialize() {
            let row: Row = row?;
            lexicon.insert(&row.word, row.valence, row.arousal)?;
        }
        Ok(lexicon)
    }

    /// Writes the CSV layout in sorted word order.
    pub fn write_csv(&self, writer: impl Write) -> Result<(), LexError> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["word", "valence", "arousal"])?;
        for (word, (valence, arousal)) in &self.entries {
            out.write_record([word.as_str(), &valence.to_string(), &arousal.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Frequency-weighted mean norms of a document's lexicon hits. The means
/// are absent exactly when no token matched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffectScore {
    pub hits: usize,
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
}

/// Scores a document: sum of v_i * f_i over matched words divided by the
/// total matched frequency, likewise for arousal.
pub fn score(tokens: &TokenSequence, lexicon: &AffectLexicon) -> AffectScore {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for token in &tokens.tokens {
        if lexicon.contains(token) {
            *freq.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    let hits: usize = freq.values().sum();
    if hits == 0 {
        return AffectScore {
            hits: 0,
            valence: None,
            arousal: None,
        };
    }
    let mut v_sum = 0.0;
    let mut a_sum = 0.0;
    for (word, f) in freq {
        let (v, a) = lexicon.get(word).expect("frequency map only holds hits");
        v_sum += v * f as f64;
        a_sum += a * f as f64;
    }
    AffectScore {
        hits,
        valence: Some(v_sum / hits as f64),
        arousal: Some(a_sum / hits as f64),
    }
}

/// Centers a norm from the 1..9 scale onto -4..4.
pub fn rescale(x: f64) -> Result<f64, LexError> {
    if !(NORM_LO..=NORM_HI).contains(&x) {
        return Err(LexError::RescaleOutOfRange(x));
    }
    Ok(x - 5.0)
}

/// Dead-zone half-widths around the centered axes. Directional labels
/// require strictly exceeding them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantThresholds {
    vt: f64,
    at: f64,
}

impl QuadrantThresholds {
    pub fn new(vt: f64, at: f64) -> Result<Self, LexError> {
        for t in [vt, at] {
            if !(0.0..4.0).contains(&t) {
                return Err(LexError::BadThreshold(t));
            }
        }
        Ok(QuadrantThresholds { vt, at })
    }

    pub fn vt(&self) -> f64 {
        self.vt
    }

    pub fn at(&self) -> f64 {
        self.at
    }
}

/// The four planar mood quadrants plus the dead zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoodLabel {
    Happy,
    Angry,
    Sad,
    Relaxed,
    Unknown,
}

impl std::fmt::Display for MoodLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MoodLabel::Happy => "happy",
            MoodLabel::Angry => "angry",
            MoodLabel::Sad => "sad",
            MoodLabel::Relaxed => "relaxed",
            MoodLabel::Unknown => "unknown",
        };
        f.write_str(name)
    }
}

/// Places a scored document in a mood quadrant. Both centered values
/// must strictly clear their thresholds; anything on or inside the dead
/// zone, straddling an axis, or unscored is unknown.
pub fn quadrant(s: &AffectScore, t: &QuadrantThresholds) -> MoodLabel {
    let (Some(valence), Some(arousal)) = (s.valence, s.arousal) else {
        return MoodLabel::Unknown;
    };
    let v = rescale(valence).expect("affect scores stay on the norm scale");
    let a = rescale(arousal).expect("affect scores stay on the norm scale");
    match (v > t.vt, v < -t.vt, a > t.at, a < -t.at) {
        (true, _, true, _) => MoodLabel::Happy,
        (_, true, true, _) => MoodLabel::Angry,
        (_, true, _, true) => MoodLabel::Sad,
        (true, _, _, true) => MoodLabel::Relaxed,
        _ => MoodLabel::Unknown,
    }
}

/// Collapses the planar model to polarity using valence alone; `None`
/// is the unknown band around the axis.
pub fn polarity(s: &AffectScore, vt: f64) -> Option<Polarity> {
    let valence = s.valence?;
    let v = rescale(valence).expect("affect scores stay on the norm scale");
    if v > vt {
        Some(Polarity::Positive)
    } else if v < -vt {
        Some(Polarity::Negative)
    } else {
        None
    }
}

/// A pre-extracted synonym set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Synset {
    pub id: String,
    pub words: Vec<String>,
}

/// Reads JSON-lines synsets, skipping blank lines.
pub fn read_synsets_jsonl(reader: impl BufRead) -> Result<Vec<Synset>, LexError> {
    let mut synsets = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let synset =
            serde_json::from_str(&line).map_err(|source| LexError::Json { line: i + 1, source })?;
        synsets.push(synset);
    }
    Ok(synsets)
}

/// Reads an affect filter: one synset id per line, blanks skipped.
pub fn read_filter(reader: impl BufRead) -> Result<BTreeSet<String>, LexError> {
    let mut ids = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() {
            ids.insert(id.to_string());
        }
    }
    Ok(ids)
}

/// Grows a lexicon one hop through synsets: every co-member of a synset
/// containing a base word is added with that base word's norms, words
/// reached from several distinct base words take the mean of their
/// norms, and additions are kept only if some synset in `filter`
/// contains them. Base entries always survive unchanged. Words added
/// here do not seed further additions; rerunning with the same inputs
/// changes nothing unless the synsets chain new base words together.
pub fn expand_lexicon(
    base: &AffectLexicon,
    synsets: &[Synset],
    filter: &BTreeSet<String>,
) -> AffectLexicon {
    let mut sources: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut allowed: BTreeSet<String> = BTreeSet::new();
    for synset in synsets {
        let members: Vec<String> = synset
            .words
            .iter()
            .map(|w| w.trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if filter.contains(&synset.id) {
            allowed.extend(members.iter().cloned());
        }
        let bases: Vec<&String> = members.iter().filter(|w| base.contains(w)).collect();
        if bases.is_empty() {
            continue;
        }
        for word in &members {
            if base.contains(word) {
                continue;
            }
            let entry = sources.entry(word.clone()).or_default();
            for b in &bases {
                entry.insert((*b).clone());
            }
        }
    }
    let mut expanded = base.clone();
    for (word, base_words) in sources {
        if !allowed.contains(&word) {
            continue;
        }
        let mut v_sum = 0.0;
        let mut a_sum = 0.0;
        for b in &base_words {
            let (v, a) = base.get(b).expect("sources hold base words");
            v_sum += v;
            a_sum += a;
        }
        let count = base_words.len() as f64;
        expanded
            .insert(&word, v_sum / count, a_sum / count)
            .expect("means of in-range norms stay in range");
    }
    expanded
}

/// A calibrated threshold pair with its agreement statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub vt: f64,
    pub at: f64,
    pub agreement: f64,
    pub labeled: usize,
}

/// Sweeps a shared threshold t = step, 2*step, ... below 4, stopping
/// once fewer than `floor` documents receive a directional label, and
/// returns the sweep point with the highest agreement against the gold
/// labels (matches over labeled documents only). Ties keep the smaller
/// threshold.
pub fn calibrate(
    docs: &[(TokenSequence, MoodLabel)],
    lexicon: &AffectLexicon,
    step: f64,
    floor: usize,
) -> Result<Calibration, LexError> {
    if docs.is_empty() {
        return Err(LexError::EmptyCorpus);
    }
    if !step.is_finite() || step <= 0.0 {
        return Err(LexError::BadStep(step));
    }
    for (index, (_, gold)) in docs.iter().enumerate() {
        if *gold == MoodLabel::Unknown {
            return Err(LexError::UnknownGold { index });
        }
    }
    let scores: Vec<(AffectScore, MoodLabel)> = docs
        .iter()
        .map(|(tokens, gold)| (score(tokens, lexicon), *gold))
        .collect();
    let mut best: Option<Calibration> = None;
    for i in 1.. {
        let t = step * i as f64;
        if t >= 4.0 {
            break;
        }
        let thresholds = QuadrantThresholds::new(t, t).expect("sweep stays in range");
        let mut labeled = 0usize;
        let mut matches = 0usize;
        for (s, gold) in &scores {
            let label = quadrant(s, &thresholds);
            if label == MoodLabel::Unknown {
                continue;
            }
            labeled += 1;
            if label == *gold {
                matches += 1;
            }
        }
        if labeled < floor.max(1) {
            break;
        }
        let agreement = matches as f64 / labeled as f64;
        if best.is_none_or(|b| agreement > b.agreement) {
            best = Some(Calibration {
                vt: t,
                at: t,
                agreement,
                labeled,
            });
        }
    }
    best.ok_or(LexError::NothingLabelable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn seq(words: &[&str]) -> TokenSequence {
        TokenSequence::new(words.iter().map(|w| w.to_string()).collect())
    }

    fn small_lexicon() -> AffectLexicon {
        let mut lex = AffectLexicon::new();
        lex.insert("good", 7.0, 6.0).unwrap();
        lex.insert("bad", 2.0, 3.0).unwrap();
        lex
    }

    #[test]
    fn score_is_the_frequency_weighted_mean() {
        let s = score(&seq(&["good", "good", "bad"]), &small_lexicon());
        assert_eq!(s.hits, 3);
        assert_relative_eq!(s.valence.unwrap(), 16.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(s.arousal.unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn unmatched_documents_have_no_score() {
        let s = score(&seq(&["nothing", "matches"]), &small_lexicon());
        assert_eq!(s.hits, 0);
        assert_eq!(s.valence, None);
        assert_eq!(s.arousal, None);
        let t = QuadrantThresholds::new(0.25, 0.25).unwrap();
        assert_eq!(quadrant(&s, &t), MoodLabel::Unknown);
        assert_eq!(polarity(&s, 0.25), None);
    }

    #[test]
    fn repeating_one_word_keeps_its_norms() {
        let lex = small_lexicon();
        for k in 1..=5 {
            let s = score(&seq(&vec!["good"; k]), &lex);
            assert_eq!(s.hits, k);
            assert_relative_eq!(s.valence.unwrap(), 7.0, epsilon = 1e-12);
            assert_relative_eq!(s.arousal.unwrap(), 6.0, epsilon = 1e-12);
        }
    }

    proptest! {
        /// Brute force over the raw token list in reading order must
        /// agree with the frequency-map implementation; likewise the
        /// score must survive permutation and uniform duplication.
        #[test]
        fn score_matches_brute_force_and_is_order_free(
            words in proptest::collection::vec(
                proptest::sample::select(vec!["good", "bad", "other", "noise"]),
                1..40,
            ),
        ) {
            let lex = small_lexicon();
            let doc = seq(&words);
            let s = score(&doc, &lex);

            let mut v_sum = 0.0;
            let mut a_sum = 0.0;
            let mut hits = 0usize;
            for w in &words {
                if let Some((v, a)) = lex.get(w) {
                    v_sum += v;
                    a_sum += a;
                    hits += 1;
                }
            }
            prop_assert_eq!(s.hits, hits);
            if hits > 0 {
                prop_assert!((s.valence.unwrap() - v_sum / hits as f64).abs() < 1e-12);
                prop_assert!((s.arousal.unwrap() - a_sum / hits as f64).abs() < 1e-12);
            }

            let mut reversed = words.clone();
            reversed.reverse();
            prop_assert_eq!(score(&seq(&reversed), &lex), s);

            let doubled: Vec<&str> = words.iter().chain(&words).copied().collect();
            let d = score(&seq(&doubled), &lex);
            prop_assert_eq!(d.hits, 2 * hits);
            if hits > 0 {
                prop_assert!((d.valence.unwrap() - s.valence.unwrap()).abs() < 1e-12);
                prop_assert!((d.arousal.unwrap() - s.arousal.unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rescale_centers_the_norm_scale() {
        assert_eq!(rescale(5.0).unwrap(), 0.0);
        assert_eq!(rescale(9.0).unwrap(), 4.0);
        assert_eq!(rescale(1.0).unwrap(), -4.0);
        assert!(matches!(
            rescale(0.5),
            Err(LexError::RescaleOutOfRange(_))
        ));
        assert!(rescale(9.1).is_err());
    }

    fn scored(v: f64, a: f64) -> AffectScore {
        AffectScore {
            hits: 1,
            valence: Some(v),
            arousal: Some(a),
        }
    }

    #[test]
    fn quadrants_follow_the_planar_rules() {
        let t = QuadrantThresholds::new(0.25, 0.25).unwrap();
        assert_eq!(quadrant(&scored(6.0, 6.0), &t), MoodLabel::Happy);
        assert_eq!(quadrant(&scored(4.0, 6.5), &t), MoodLabel::Angry);
        assert_eq!(quadrant(&scored(6.0, 4.0), &t), MoodLabel::Relaxed);
        assert_eq!(quadrant(&scored(5.0, 5.0), &t), MoodLabel::Unknown);
        let t34 = QuadrantThresholds::new(0.34, 0.34).unwrap();
        assert_eq!(quadrant(&scored(4.5, 4.5), &t34), MoodLabel::Sad);
        // Axis straddling: strong valence, neutral arousal.
        assert_eq!(quadrant(&scored(6.0, 5.0), &t), MoodLabel::Unknown);
    }

    #[test]
    fn threshold_boundaries_are_strict() {
        let t = QuadrantThresholds::new(0.5, 0.5).unwrap();
        assert_eq!(quadrant(&scored(5.5, 6.0), &t), MoodLabel::Unknown);
        assert_eq!(quadrant(&scored(6.0, 5.5), &t), MoodLabel::Unknown);
        assert_eq!(quadrant(&scored(4.5, 6.0), &t), MoodLabel::Unknown);
        let just_over = QuadrantThresholds::new(0.49, 0.49).unwrap();
        assert_eq!(quadrant(&scored(5.5, 5.5), &just_over), MoodLabel::Happy);
    }

    #[test]
    fn polarity_uses_valence_alone() {
        assert_eq!(polarity(&scored(8.0, 5.0), 0.34), Some(Polarity::Positive));
        assert_eq!(polarity(&scored(2.0, 5.0), 0.34), Some(Polarity::Negative));
        assert_eq!(polarity(&scored(5.0, 9.0), 0.34), None);
        assert_eq!(polarity(&scored(5.34, 5.0), 0.34), None);
    }

    #[test]
    fn threshold_construction_validates_the_range() {
        assert!(QuadrantThresholds::new(0.0, 0.0).is_ok());
        assert!(matches!(
            QuadrantThresholds::new(4.0, 0.0),
            Err(LexError::BadThreshold(_))
        ));
        assert!(QuadrantThresholds::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn lexicon_insert_validates_and_normalizes() {
        let mut lex = AffectLexicon::new();
        lex.insert("  Good ", 7.0, 6.0).unwrap();
        assert_eq!(lex.get("good"), Some((7.0, 6.0)));
        assert!(matches!(
            lex.insert("good", 5.0, 5.0),
            Err(LexError::DuplicateWord(_))
        ));
        assert!(matches!(
            lex.insert("high", 9.5, 5.0),
            Err(LexError::OutOfRange { .. })
        ));
        assert!(matches!(lex.insert("  ", 5.0, 5.0), Err(LexError::EmptyWord)));
    }

    #[test]
    fn lexicon_csv_round_trips() {
        let lex = small_lexicon();
        let mut bytes = Vec::new();
        lex.write_csv(&mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("word,valence,arousal\n"));
        let back = AffectLexicon::read_csv(bytes.as_slice()).unwrap();
        assert_eq!(back, lex);

        let bad = "word,valence,arousal\nx,notanumber,5\n";
        assert!(AffectLexicon::read_csv(bad.as_bytes()).is_err());
    }

    fn synset(id: &str, words: &[&str]) -> Synset {
        Synset {
            id: id.to_string(),
            words: words.iter().map(|w| w.to_string()).collect(),
        }
    }

    fn filter_of(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|i| i.to_string()).collect()
    }

    #[test]
    fn expansion_copies_norms_one_hop_through_synsets() {
        let mut base = AffectLexicon::new();
        base.insert("happy", 8.0, 6.0).unwrap();
        let synsets = [synset("s1", &["happy", "glad"])];

        let grown = expand_lexicon(&base, &synsets, &filter_of(&["s1"]));
        assert_eq!(grown.len(), 2);
        assert_eq!(grown.get("glad"), Some((8.0, 6.0)));

        let filtered = expand_lexicon(&base, &synsets, &filter_of(&[]));
        assert_eq!(filtered.len(), 1);
        assert!(filtered.contains("happy"));
    }

    #[test]
    fn expansion_averages_norms_over_distinct_base_sources() {
        let mut base = AffectLexicon::new();
        base.insert("happy", 8.0, 6.0).unwrap();
        base.insert("merry", 7.0, 5.0).unwrap();
        let synsets = [
            synset("s1", &["happy", "glad"]),
            synset("s2", &["merry", "glad"]),
            // A second synset pairing happy with glad must not double
            // happy's weight in the mean.
            synset("s3", &["happy", "glad", "beaming"]),
        ];
        let grown = expand_lexicon(&base, &synsets, &filter_of(&["s1", "s2", "s3"]));
        assert_eq!(grown.get("glad"), Some((7.5, 5.5)));
        assert_eq!(grown.get("beaming"), Some((8.0, 6.0)));
        // Base norms never change.
        assert_eq!(grown.get("happy"), Some((8.0, 6.0)));
    }

    #[test]
    fn filter_membership_may_come_from_any_synset() {
        let mut base = AffectLexicon::new();
        base.insert("happy", 8.0, 6.0).unwrap();
        let synsets = [
            synset("s1", &["happy", "glad"]),
            synset("s3", &["glad", "blue"]),
        ];
        // s1 contributed glad but only s3 is an affect synset; glad is a
        // member of s3, so it stays. blue has no base source, so it is
        // never added.
        let grown = expand_lexicon(&base, &synsets, &filter_of(&["s3"]));
        assert_eq!(grown.get("glad"), Some((8.0, 6.0)));
        assert!(!grown.contains("blue"));
        assert_eq!(grown.len(), 2);
    }

    #[test]
    fn expansion_is_idempotent_without_chained_synsets() {
        let mut base = AffectLexicon::new();
        base.insert("happy", 8.0, 6.0).unwrap();
        base.insert("gloomy", 2.5, 4.0).unwrap();
        let synsets = [
            synset("s1", &["happy", "glad", "sunny"]),
            synset("s2", &["gloomy", "dreary"]),
        ];
        let filter = filter_of(&["s1", "s2"]);
        let once = expand_lexicon(&base, &synsets, &filter);
        let twice = expand_lexicon(&once, &synsets, &filter);
        assert_eq!(once, twice);
    }

    #[test]
    fn synset_jsonl_reader_reports_bad_lines() {
        let text = "{\"id\":\"s1\",\"words\":[\"a\",\"b\"]}\n\n{\"id\":\"s2\",\"words\":[]}\n";
        let synsets = read_synsets_jsonl(text.as_bytes()).unwrap();
        assert_eq!(synsets.len(), 2);
        assert_eq!(synsets[0].words, vec!["a", "b"]);

        let bad = "{\"id\":\"s1\",\"words\":[\"a\"]}\nnot json\n";
        match read_synsets_jsonl(bad.as_bytes()) {
            Err(LexError::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let ids = read_filter("s1\n\n  s2\n".as_bytes()).unwrap();
        assert_eq!(ids, filter_of(&["s1", "s2"]));
    }

    /// Four documents, one per quadrant, each far enough from the axes
    /// that the first sweep step labels all of them correctly.
    fn quadrant_corpus() -> (Vec<(TokenSequence, MoodLabel)>, AffectLexicon) {
        let mut lex = AffectLexicon::new();
        lex.insert("joy", 8.0, 8.0).unwrap();
        lex.insert("rage", 2.0, 8.0).unwrap();
        lex.insert("grief", 2.0, 2.0).unwrap();
        lex.insert("calm", 8.0, 2.0).unwrap();
        let docs = vec![
            (seq(&["joy", "joy"]), MoodLabel::Happy),
            (seq(&["rage"]), MoodLabel::Angry),
            (seq(&["grief", "grief"]), MoodLabel::Sad),
            (seq(&["calm"]), MoodLabel::Relaxed),
        ];
        (docs, lex)
    }

    #[test]
    fn calibration_finds_perfect_agreement_at_the_first_step() {
        let (docs, lex) = quadrant_corpus();
        let c = calibrate(&docs, &lex, 0.25, 3).unwrap();
        assert_eq!(c.vt, 0.25);
        assert_eq!(c.at, 0.25);
        assert_eq!(c.agreement, 1.0);
        assert_eq!(c.labeled, 4);
    }

    #[test]
    fn calibration_ties_keep_the_smaller_threshold() {
        // Agreement is 1.0 at every feasible step, so the winner must be
        // the first.
        let (docs, lex) = quadrant_corpus();
        let c = calibrate(&docs, &lex, 0.5, 4).unwrap();
        assert_eq!(c.vt, 0.5);
    }

    #[test]
    fn calibration_rejects_degenerate_inputs() {
        let (docs, lex) = quadrant_corpus();
        assert!(matches!(
            calibrate(&[], &lex, 0.25, 3),
            Err(LexError::EmptyCorpus)
        ));
        assert!(matches!(
            calibrate(&docs, &lex, 0.0, 3),
            Err(LexError::BadStep(_))
        ));
        let mut bad_gold = docs.clone();
        bad_gold[2].1 = MoodLabel::Unknown;
        assert!(matches!(
            calibrate(&bad_gold, &lex, 0.25, 3),
            Err(LexError::UnknownGold { index: 2 })
        ));

        // Every document sits at the origin: nothing is labelable.
        let mut neutral = AffectLexicon::new();
        neutral.insert("meh", 5.0, 5.0).unwrap();
        let flat = vec![(seq(&["meh"]), MoodLabel::Happy); 3];
        assert!(matches!(
            calibrate(&flat, &neutral, 0.25, 1),
            Err(LexError::NothingLabelable)
        ));
    }

    #[test]
    fn calibration_stops_when_the_labeled_count_falls_below_the_floor() {
        // joy scores (8, 8) and lands in Q1 until t reaches 3; a weaker
        // document at (5.6, 5.6) drops out once t passes 0.6. With the
        // floor at 2 the sweep must stop before t = 0.75, so the weak
        // document's mislabeling keeps agreement at 0.5.
        let mut lex = AffectLexicon::new();
        lex.insert("joy", 8.0, 8.0).unwrap();
        lex.insert("mild", 5.6, 5.6).unwrap();
        let docs = vec![
            (seq(&["joy"]), MoodLabel::Happy),
            (seq(&["mild"]), MoodLabel::Sad),
        ];
        let c = calibrate(&docs, &lex, 0.25, 2).unwrap();
        assert_eq!(c.vt, 0.25);
        assert_eq!(c.agreement, 0.5);
        assert_eq!(c.labeled, 2);
    }
}
