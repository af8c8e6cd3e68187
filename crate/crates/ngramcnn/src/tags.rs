//! Social-tag annotation: a four-cluster mood folksonomy, tiered
//! labeling rules over per-track tag tallies, exhaustive purity audits
//! of those rules, agreement matrices between label maps, and
//! embedding-based cluster-similarity diagnostics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{cosine, EmbedError, EmbeddingTable};
use crate::textprep::Polarity;

pub const Q1_TAGS: [&str; 10] = [
    "happy", "happiness", "bright", "joyous", "cheerful", "fun", "humorous", "merry", "exciting",
    "silly",
];
pub const Q2_TAGS: [&str; 10] = [
    "angry",
    "aggressive",
    "fierce",
    "outrageous",
    "rebellious",
    "anxious",
    "fiery",
    "tense",
    "anger",
    "hostile",
];
pub const Q3_TAGS: [&str; 10] = [
    "sad",
    "bittersweet",
    "bitter",
    "sadness",
    "depressing",
    "tragic",
    "gloomy",
    "miserable",
    "funeral",
    "sorrow",
];
pub const Q4_TAGS: [&str; 10] = [
    "relaxed", "tender", "soothing", "mellow", "gentle", "peaceful", "soft", "calm", "quiet",
    "delicate",
];

#[derive(Debug, Error)]
pub enum TagError {
    #[error("cluster {0} is empty")]
    EmptyCluster(QuadrantLabel),
    #[error("tag `{0}` appears in two clusters")]
    OverlappingClusters(String),
    #[error("label maps share no ids")]
    NoSharedIds,
    #[error("need {needed} embeddable tags, missing {missing:?}")]
    TooFewResolvable { needed: usize, missing: Vec<String> },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The four mood quadrants of the planar model: high/low valence
/// crossed with high/low arousal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuadrantLabel {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl QuadrantLabel {
    pub const ALL: [QuadrantLabel; 4] = [
        QuadrantLabel::Q1,
        QuadrantLabel::Q2,
        QuadrantLabel::Q3,
        QuadrantLabel::Q4,
    ];

    pub fn index(self) -> usize {
        match self {
            QuadrantLabel::Q1 => 0,
            QuadrantLabel::Q2 => 1,
            QuadrantLabel::Q3 => 2,
            QuadrantLabel::Q4 => 3,
        }
    }
}

impl std::fmt::Display for QuadrantLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            QuadrantLabel::Q1 => "Q1",
            QuadrantLabel::Q2 => "Q2",
            QuadrantLabel::Q3 => "Q3",
            QuadrantLabel::Q4 => "Q4",
        };
        f.write_str(name)
    }
}

/// Lowercases, trims, and collapses internal whitespace. Folksonomy
/// matching is exact string equality after this normalization.
pub fn normalize_tag(raw: &str) -> String {
    raw.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Four pairwise-disjoint, non-empty clusters of mood tags, one per
/// quadrant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folksonomy {
    clusters: [BTreeSet<String>; 4],
}

impl Default for Folksonomy {
    fn default() -> Self {
        let cluster = |tags: [&str; 10]| tags.iter().map(|t| t.to_string()).collect();
        Folksonomy::new([
            cluster(Q1_TAGS),
            cluster(Q2_TAGS),
            cluster(Q3_TAGS),
            cluster(Q4_TAGS),
        ])
        .expect("default clusters are disjoint and non-empty")
    }
}

#[derive(Serialize, Deserialize)]
struct FolksonomyFile {
    #[serde(rename = "Q1")]
    q1: Vec<String>,
    #[serde(rename = "Q2")]
    q2: Vec<String>,
    #[serde(rename = "Q3")]
    q3: Vec<String>,
    #[serde(rename = "Q4")]
    q4: Vec<String>,
}

impl Folksonomy {
    pub fn new(clusters: [BTreeSet<String>; 4]) -> Result<Self, TagError> {
        for q in QuadrantLabel::ALL {
            if clusters[q.index()].is_empty() {
                return Err(TagError::EmptyCluster(q));
            }
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if let Some(tag) = clusters[i].intersection(&clusters[j]).next() {
                    return Err(TagError::OverlappingClusters(tag.clone()));
                }
            }
        }
        Ok(Folksonomy { clusters })
    }

    pub fn cluster(&self, q: QuadrantLabel) -> &BTreeSet<String> {
        &self.clusters[q.index()]
    }

    pub fn quadrant_of(&self, tag: &str) -> Option<QuadrantLabel> {
        QuadrantLabel::ALL
            .into_iter()
            .find(|q| self.clusters[q.index()].contains(tag))
    }

    /// Parses the {"Q1": [...], ..., "Q4": [...]} JSON layout,
    /// normalizing every tag.
    pub fn read_json(reader: impl std::io::Read) -> Result<Self, TagError> {
        let file: FolksonomyFile = serde_json::from_reader(reader)?;
        let cluster = |tags: Vec<String>| {
            tags.iter()
                .map(|t| normalize_tag(t))
                .filter(|t| !t.is_empty())
                .collect()
        };
        Folksonomy::new([
            cluster(file.q1),
            cluster(file.q2),
            cluster(file.q3),
            cluster(file.q4),
        ])
    }

    pub fn write_json(&self, writer: impl Write) -> Result<(), TagError> {
        let as_vec = |q: QuadrantLabel| self.cluster(q).iter().cloned().collect();
        let file = FolksonomyFile {
            q1: as_vec(QuadrantLabel::Q1),
            q2: as_vec(QuadrantLabel::Q2),
            q3: as_vec(QuadrantLabel::Q3),
            q4: as_vec(QuadrantLabel::Q4),
        };
        serde_json::to_writer_pretty(writer, &file)?;
        Ok(())
    }
}

/// One track's received tags, one entry per occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackTags {
    pub track_id: String,
    pub tags: Vec<String>,
}

/// Reads JSON-lines track tags, normalizing every tag and dropping
/// entries that normalize to nothing. Blank lines are skipped.
pub fn read_track_tags_jsonl(reader: impl BufRead) -> Result<Vec<TrackTags>, TagError> {
    let mut tracks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut track: TrackTags =
            serde_json::from_str(&line).map_err(|source| TagError::Json { line: i + 1, source })?;
        track.tags = track
            .tags
            .iter()
            .map(|t| normalize_tag(t))
            .filter(|t| !t.is_empty())
            .collect();
        tracks.push(track);
    }
    Ok(tracks)
}

/// Tag tallies per quadrant, in Q1..Q4 order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuadrantCounts(pub [usize; 4]);

impl QuadrantCounts {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Tags outside quadrant `q`.
    pub fn others(&self, q: QuadrantLabel) -> usize {
        self.total() - self.0[q.index()]
    }
}

/// Tallies a track's folksonomy tags per quadrant; tags outside the
/// folksonomy are ignored.
pub fn count(track: &TrackTags, folksonomy: &Folksonomy) -> QuadrantCounts {
    let mut counts = QuadrantCounts::default();
    for tag in &track.tags {
        if let Some(q) = folksonomy.quadrant_of(tag) {
            counts.0[q.index()] += 1;
        }
    }
    counts
}

/// Tier index (0..4) accepted for a quadrant with `c` own tags and `o`
/// tags across the other three quadrants, or `None`. The tiers trade
/// volume for tolerance: 4+ own tags with zero noise, then 6..8 with at
/// most one, 9..13 with at most two, 14+ with at most three.
fn tier_4q(c: usize, o: usize) -> Option<usize> {
    if c >= 4 && o == 0 {
        Some(0)
    } else if (6..=8).contains(&c) && o <= 1 {
        Some(1)
    } else if (9..=13).contains(&c) && o <= 2 {
        Some(2)
    } else if c >= 14 && o <= 3 {
        Some(3)
    } else {
        None
    }
}

/// Tier index for the merged positive/negative rule: 5+ own tags with
/// zero noise, 8..11 with at most one, 12..16 with at most two, 16+
/// with at most three. The 16-overlap resolves to whichever tier
/// accepts.
fn tier_pn(x: usize, o: usize) -> Option<usize> {
    if x >= 5 && o == 0 {
        Some(0)
    } else if (8..=11).contains(&x) && o <= 1 {
        Some(1)
    } else if (12..=16).contains(&x) && o <= 2 {
        Some(2)
    } else if x >= 16 && o <= 3 {
        Some(3)
    } else {
        None
    }
}

/// Labels a tally with the quadrant whose count clears a tier, or
/// `None` when no quadrant (or more than one) qualifies.
pub fn annotate_4q(counts: QuadrantCounts) -> Option<QuadrantLabel> {
    let total = counts.total();
    let mut winner = None;
    for q in QuadrantLabel::ALL {
        let c = counts.0[q.index()];
        if tier_4q(c, total - c).is_some() {
            if winner.is_some() {
                return None;
            }
            winner = Some(q);
        }
    }
    winner
}

/// Labels a tally positive or negative after merging Q1+Q4 against
/// Q2+Q3, or `None` when neither side clears a tier.
pub fn annotate_pn(counts: QuadrantCounts) -> Option<Polarity> {
    let p = counts.0[0] + counts.0[3];
    let n = counts.0[1] + counts.0[2];
    let p_ok = tier_pn(p, n).is_some();
    let n_ok = tier_pn(n, p).is_some();
    match (p_ok, n_ok) {
        (true, false) => Some(Polarity::Positive),
        (false, true) => Some(Polarity::Negative),
        _ => None,
    }
}

/// Which tiered labeling rule an audit exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelRule {
    Quadrants,
    Polarity,
}

/// The weakest accepted configuration of one tier.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TierPurity {
    pub accepted: u64,
    pub min_purity: f64,
    pub witness: QuadrantCounts,
}

/// Exhaustive purity report: for every count vector with total at most
/// `max_total`, the fraction of a labeled track's tags that belong to
/// the winning label, minimized per accepting tier and overall.
#[derive(Debug, Clone, Serialize)]
pub struct PurityAudit {
    pub rule: LabelRule,
    pub max_total: usize,
    pub vectors: u64,
    pub tiers: [TierPurity; 4],
    pub overall: f64,
}

/// The accepting tier and own-tag count for a labeled vector, applied
/// in tier order so overlaps attribute to the earliest tier.
fn accepted_tier(rule: LabelRule, counts: QuadrantCounts) -> Option<(usize, usize)> {
    let total = counts.total();
    match rule {
        LabelRule::Quadrants => annotate_4q(counts).map(|q| {
            let c = counts.0[q.index()];
            (tier_4q(c, total - c).expect("label implies a tier"), c)
        }),
        LabelRule::Polarity => annotate_pn(counts).map(|side| {
            let x = match side {
                Polarity::Positive => counts.0[0] + counts.0[3],
                Polarity::Negative => counts.0[1] + counts.0[2],
            };
            (tier_pn(x, total - x).expect("label implies a tier"), x)
        }),
    }
}

fn enumerate_counts(max_total: usize, mut visit: impl FnMut(QuadrantCounts)) {
    for c1 in 0..=max_total {
        for c2 in 0..=max_total - c1 {
            for c3 in 0..=max_total - c1 - c2 {
                for c4 in 0..=max_total - c1 - c2 - c3 {
                    visit(QuadrantCounts([c1, c2, c3, c4]));
                }
            }
        }
    }
}

pub fn purity_audit(rule: LabelRule, max_total: usize) -> PurityAudit {
    assert!(
        max_total >= 20,
        "max_total {max_total} cannot reach every tier"
    );
    let mut tiers = [TierPurity {
        accepted: 0,
        min_purity: f64::INFINITY,
        witness: QuadrantCounts::default(),
    }; 4];
    let mut vectors = 0u64;
    enumerate_counts(max_total, |counts| {
        vectors += 1;
        let Some((tier, own)) = accepted_tier(rule, counts) else {
            return;
        };
        let purity = own as f64 / counts.total() as f64;
        let stat = &mut tiers[tier];
        stat.accepted += 1;
        if purity < stat.min_purity {
            stat.min_purity = purity;
            stat.witness = counts;
        }
    });
    assert!(
        tiers.iter().all(|t| t.accepted > 0),
        "every tier is reachable at max_total >= 20"
    );
    let overall = tiers.iter().map(|t| t.min_purity).fold(f64::INFINITY, f64::min);
    PurityAudit {
        rule,
        max_total,
        vectors,
        tiers,
        overall,
    }
}

/// Enumerates every accepted vector with total at most `max_total` and
/// adds one tag of the winning label (each constituent quadrant in
/// turn for the merged rule). Returns the (vector, incremented index)
/// pairs whose label changed; the rules are expected to be monotone,
/// so callers treat a non-empty result as a rule defect.
pub fn monotonicity_violations(
    rule: LabelRule,
    max_total: usize,
) -> Vec<(QuadrantCounts, usize)> {
    let label_of = |counts: QuadrantCounts| -> Option<either_label::Label> {
        match rule {
            LabelRule::Quadrants => annotate_4q(counts).map(either_label::Label::Quadrant),
            LabelRule::Polarity => annotate_pn(counts).map(either_label::Label::Side),
        }
    };
    let mut violations = Vec::new();
    enumerate_counts(max_total, |counts| {
        let Some(label) = label_of(counts) else {
            return;
        };
        let winning_indices: Vec<usize> = match label {
            either_label::Label::Quadrant(q) => vec![q.index()],
            either_label::Label::Side(Polarity::Positive) => vec![0, 3],
            either_label::Label::Side(Polarity::Negative) => vec![1, 2],
        };
        for index in winning_indices {
            let mut grown = counts;
            grown.0[index] += 1;
            if label_of(grown) != Some(label) {
                violations.push((counts, index));
            }
        }
    });
    violations
}

mod either_label {
    use super::QuadrantLabel;
    use crate::textprep::Polarity;

    /// A label from either rule, so the monotonicity walk can compare
    /// before/after uniformly.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Label {
        Quadrant(QuadrantLabel),
        Side(Polarity),
    }
}

/// A confusion matrix between two label maps over their shared ids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement<L> {
    /// Sorted distinct labels; indexes both matrix axes.
    pub labels: Vec<L>,
    /// Rows follow the reference map, columns the candidate.
    pub matrix: Vec<Vec<usize>>,
    pub shared: usize,
    /// Trace over total: the fraction of shared ids labeled alike.
    pub overall: f64,
}

pub fn agreement<L: Ord + Clone>(
    reference: &BTreeMap<String, L>,
    candidate: &BTreeMap<String, L>,
) -> Result<Agreement<L>, TagError> {
    let mut pairs = Vec::new();
    for (id, r) in reference {
        if let Some(c) = candidate.get(id) {
            pairs.push((r.clone(), c.clone()));
        }
    }
    if pairs.is_empty() {
        return Err(TagError::NoSharedIds);
    }
    let mut labels: Vec<L> = pairs
        .iter()
        .flat_map(|(r, c)| [r.clone(), c.clone()])
        .collect();
    labels.sort();
    labels.dedup();
    let index_of = |l: &L| labels.binary_search(l).expect("label was collected");
    let mut matrix = vec![vec![0usize; labels.len()]; labels.len()];
    let mut matches = 0usize;
    for (r, c) in &pairs {
        matrix[index_of(r)][index_of(c)] += 1;
        if r == c {
            matches += 1;
        }
    }
    Ok(Agreement {
        labels,
        matrix,
        shared: pairs.len(),
        overall: matches as f64 / pairs.len() as f64,
    })
}

/// A mean pairwise cosine along with the tags that had no embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSimilarity {
    pub value: f64,
    pub missing: Vec<String>,
}

fn resolve<'a>(
    cluster: &'a BTreeSet<String>,
    table: &'a EmbeddingTable,
) -> (Vec<&'a [f32]>, Vec<String>) {
    let mut vectors = Vec::new();
    let mut missing = Vec::new();
    for tag in cluster {
        match table.vector(tag) {
            Some(v) => vectors.push(v),
            None => missing.push(tag.clone()),
        }
    }
    (vectors, missing)
}

/// Mean cosine over all distinct unordered pairs inside one cluster.
pub fn intra_similarity(
    cluster: &BTreeSet<String>,
    table: &EmbeddingTable,
) -> Result<ClusterSimilarity, TagError> {
    let (vectors, missing) = resolve(cluster, table);
    if vectors.len() < 2 {
        return Err(TagError::TooFewResolvable { needed: 2, missing });
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            sum += cosine(vectors[i], vectors[j])?;
            pairs += 1;
        }
    }
    Ok(ClusterSimilarity {
        value: sum / pairs as f64,
        missing,
    })
}

/// Mean cosine over all cross pairs between two clusters.
pub fn inter_similarity(
    a: &BTreeSet<String>,
    b: &BTreeSet<String>,
    table: &EmbeddingTable,
) -> Result<ClusterSimilarity, TagError> {
    let (va, mut missing) = resolve(a, table);
    let (vb, missing_b) = resolve(b, table);
    missing.extend(missing_b);
    if va.is_empty() || vb.is_empty() {
        return Err(TagError::TooFewResolvable { needed: 1, missing });
    }
    let mut sum = 0.0;
    for x in &va {
        for y in &vb {
            sum += cosine(x, y)?;
        }
    }
    Ok(ClusterSimilarity {
        value: sum / (va.len() * vb.len()) as f64,
        missing,
    })
}
