//! Hybrid structure QA corpora: nearest-token lists, similarity judgments and
//! description/token matching.

use std::collections::{BTreeMap, HashSet};
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{assign_attributes, AttributeError, ImportanceStrategy};
use crate::graph::Graph;
use crate::model::Codebook;
use crate::token::{StructuralToken, TokenAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaKind {
    Knn,
    Simjudge,
    Descmatch,
}

impl QaKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Knn => "knn",
            Self::Simjudge => "simjudge",
            Self::Descmatch => "descmatch",
        }
    }
}

impl std::str::FromStr for QaKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "knn" => Ok(Self::Knn),
            "simjudge" => Ok(Self::Simjudge),
            "descmatch" => Ok(Self::Descmatch),
            other => Err(format!("unknown corpus kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub kind: QaKind,
    pub question: String,
    pub answer: String,
    pub provenance: Vec<String>,
    pub split: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("every codebook entry has zero norm")]
    DegenerateCodebook,
    #[error("k = {k} needs at least {} usable codebook entries, found {usable}", k + 1)]
    NeighborCount { k: usize, usable: usize },
    #[error("thresholds must satisfy -1 <= tau_neg < tau_pos <= 1, got tau_neg={tau_neg} tau_pos={tau_pos}")]
    Thresholds { tau_pos: f64, tau_neg: f64 },
    #[error("graph {id} has {nodes} nodes, more than the {limit} nameable nodes")]
    GraphTooLargeForDescription {
        id: String,
        nodes: usize,
        limit: usize,
    },
    #[error("no token assignment for graph {0}")]
    MissingAssignment(String),
    #[error("graph {id}: {source}")]
    Attribute { id: String, source: AttributeError },
    #[error("unparseable description: {0}")]
    Description(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub const DEFAULT_SPLIT: &str = "train";

const NUMBER_WORDS: [&str; 21] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];

pub fn number_word(n: usize) -> String {
    NUMBER_WORDS
        .get(n)
        .map_or_else(|| n.to_string(), |w| w.to_string())
}

pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn knn_question(target: StructuralToken, k: usize) -> String {
    format!(
        "Here is the target structural token {target}, and its {} nearest graph structural tokens are:",
        number_word(k)
    )
}

/// One record per usable codebook entry listing its `k` most cosine-similar
/// entries, ties broken by lower index.
pub fn gen_knn_records(cb: &Codebook, k: usize) -> Result<Vec<QaRecord>, CorpusError> {
    let rows: Vec<Vec<f64>> = cb.entries.rows().into_iter().map(|r| r.to_vec()).collect();
    let usable: Vec<usize> = (0..rows.len())
        .filter(|&i| {
            let ok = rows[i].iter().any(|&v| v != 0.0);
            if !ok {
                log::warn!("codebook entry {i} has zero norm and is excluded from knn records");
            }
            ok
        })
        .collect();
    if usable.is_empty() {
        return Err(CorpusError::DegenerateCodebook);
    }
    if k >= usable.len() {
        return Err(CorpusError::NeighborCount {
            k,
            usable: usable.len(),
        });
    }
    let mut out = Vec::with_capacity(usable.len());
    for &i in &usable {
        let mut sims: Vec<(f64, usize)> = usable
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| (cosine(&rows[i], &rows[j]).expect("nonzero rows"), j))
            .collect();
        sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let answer: Vec<String> = sims[..k]
            .iter()
            .map(|&(_, j)| StructuralToken(j).to_string())
            .collect();
        out.push(QaRecord {
            kind: QaKind::Knn,
            question: knn_question(StructuralToken(i), k),
            answer: answer.join(", "),
            provenance: vec![StructuralToken(i).to_string()],
            split: DEFAULT_SPLIT.into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityThresholds {
    pub tau_pos: f64,
    pub tau_neg: f64,
}

impl Default for SimilarityThresholds {
    fn default() -> Self {
        Self {
            tau_pos: 0.8,
            tau_neg: 0.2,
        }
    }
}

impl SimilarityThresholds {
    pub fn new(tau_pos: f64, tau_neg: f64) -> Result<Self, CorpusError> {
        if !(-1.0..=1.0).contains(&tau_neg)
            || !(-1.0..=1.0).contains(&tau_pos)
            || tau_neg >= tau_pos
        {
            return Err(CorpusError::Thresholds { tau_pos, tau_neg });
        }
        Ok(Self { tau_pos, tau_neg })
    }

    /// `Some(true)` for similar, `Some(false)` for dissimilar, `None` in the dead zone.
    pub fn label(&self, cos: f64) -> Option<bool> {
        if cos > self.tau_pos {
            Some(true)
        } else if cos < self.tau_neg {
            Some(false)
        } else {
            None
        }
    }
}

/// Continuous global-node embedding of one graph and its token.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding {
    pub id: String,
    pub token: StructuralToken,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimjudgeConfig {
    pub thresholds: SimilarityThresholds,
    /// Total pairs requested.
    pub pairs: usize,
    /// Similar : dissimilar.
    pub ratio: (usize, usize),
    pub seed: u64,
}

impl SimjudgeConfig {
    pub fn new(thresholds: SimilarityThresholds, pairs: usize, seed: u64) -> Self {
        Self {
            thresholds,
            pairs,
            ratio: (1, 1),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsufficientPairs {
    pub similar_wanted: usize,
    pub similar_found: usize,
    pub dissimilar_wanted: usize,
    pub dissimilar_found: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimjudgeOutput {
    pub records: Vec<QaRecord>,
    /// Set when a class could not be filled; `records` is then partial.
    pub shortfall: Option<InsufficientPairs>,
}

pub fn simjudge_question(a: StructuralToken, b: StructuralToken) -> String {
    format!(
        "Here are two tokens {a} and {b}, judge whether they represent similar structures or not."
    )
}

const ENUMERATE_LIMIT: usize = 2_000_000;

/// Seeded, class-balanced pair sampling over pre-quantization embeddings.
pub fn gen_simjudge_records(embeddings: &[GraphEmbedding], cfg: &SimjudgeConfig) -> SimjudgeOutput {
    let (rp, rn) = cfg.ratio;
    let want_pos = (cfg.pairs * rp).checked_div(rp + rn).unwrap_or(0);
    let want_neg = cfg.pairs - want_pos;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = embeddings.len();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let consider =
        |i: usize, j: usize, pos: &mut Vec<(usize, usize)>, neg: &mut Vec<(usize, usize)>| {
            let Some(c) = cosine(&embeddings[i].vector, &embeddings[j].vector) else {
                return;
            };
            match cfg.thresholds.label(c) {
                Some(true) if pos.len() < want_pos => pos.push((i, j)),
                Some(false) if neg.len() < want_neg => neg.push((i, j)),
                _ => {}
            }
        };
    if total_pairs <= ENUMERATE_LIMIT {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        all.shuffle(&mut rng);
        for (i, j) in all {
            if pos.len() >= want_pos && neg.len() >= want_neg {
                break;
            }
            consider(i, j, &mut pos, &mut neg);
        }
    } else {
        let mut seen = HashSet::new();
        let attempts = 50 * cfg.pairs.max(1);
        for _ in 0..attempts {
            if pos.len() >= want_pos && neg.len() >= want_neg {
                break;
            }
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j || !seen.insert((i.min(j), i.max(j))) {
                continue;
            }
            consider(i.min(j), i.max(j), &mut pos, &mut neg);
        }
    }
    let shortfall = (pos.len() < want_pos || neg.len() < want_neg).then(|| {
        let s = InsufficientPairs {
            similar_wanted: want_pos,
            similar_found: pos.len(),
            dissimilar_wanted: want_neg,
            dissimilar_found: neg.len(),
        };
        log::warn!("simjudge sampling fell short: {s:?}");
        s
    });
    let make = |(i, j): (usize, usize), similar: bool| QaRecord {
        kind: QaKind::Simjudge,
        question: simjudge_question(embeddings[i].token, embeddings[j].token),
        answer: if similar { "similar" } else { "dissimilar" }.into(),
        provenance: vec![embeddings[i].id.clone(), embeddings[j].id.clone()],
        split: DEFAULT_SPLIT.into(),
    };
    let mut records: Vec<QaRecord> = pos.into_iter().map(|p| make(p, true)).collect();
    records.extend(neg.into_iter().map(|p| make(p, false)));
    SimjudgeOutput { records, shortfall }
}

/// Letters A..Z, then AA..ZZ.
pub const NAME_BUDGET: usize = 26 + 26 * 26;

pub fn node_name(i: usize) -> Option<String> {
    let letter = |k: usize| char::from(b'A' + k as u8);
    if i < 26 {
        Some(letter(i).to_string())
    } else if i < NAME_BUDGET {
        let j = i - 26;
        Some(format!("{}{}", letter(j / 26), letter(j % 26)))
    } else {
        None
    }
}

pub fn name_index(name: &str) -> Option<usize> {
    let b = name.as_bytes();
    let v = |c: u8| c.is_ascii_uppercase().then(|| (c - b'A') as usize);
    match b.len() {
        1 => v(b[0]),
        2 => Some(26 + v(b[0])? * 26 + v(b[1])?),
        _ => None,
    }
}

const DESC_PREFIX: &str = "Here is the target graph: ";
const DESC_SUFFIX: &str = ". The corresponding graph structural token is:";

/// Describes `g` with nodes named in attribute-rank order. Edges are listed
/// by the rank of their earlier endpoint, then of the later one.
pub fn describe_graph(g: &Graph, strategy: ImportanceStrategy) -> Result<String, CorpusError> {
    let n = g.node_count();
    if n > NAME_BUDGET {
        return Err(CorpusError::GraphTooLargeForDescription {
            id: g.id().to_string(),
            nodes: n,
            limit: NAME_BUDGET,
        });
    }
    let attrs = assign_attributes(g, strategy).map_err(|source| CorpusError::Attribute {
        id: g.id().to_string(),
        source,
    })?;
    let mut pos = vec![0; n];
    for (p, &v) in attrs.rank_order().iter().enumerate() {
        pos[v] = p;
    }
    let mut edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .map(|&(a, b)| (pos[a].min(pos[b]), pos[a].max(pos[b])))
        .collect();
    edges.sort_unstable();
    let body = if edges.is_empty() {
        format!("{n} node(s) and no connections")
    } else {
        edges
            .iter()
            .map(|&(a, b)| {
                format!(
                    "node {} and node {} is connected",
                    node_name(a).expect("within budget"),
                    node_name(b).expect("within budget")
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    };
    Ok(format!("{DESC_PREFIX}{body}{DESC_SUFFIX}"))
}

/// Inverse of [`describe_graph`]: the edge set as name positions.
pub fn parse_description(question: &str) -> Result<Vec<(usize, usize)>, CorpusError> {
    let bad = || CorpusError::Description(question.to_string());
    let body = question
        .strip_prefix(DESC_PREFIX)
        .and_then(|s| s.strip_suffix(DESC_SUFFIX))
        .ok_or_else(bad)?;
    if body.ends_with(" node(s) and no connections") {
        return Ok(Vec::new());
    }
    body.split("; ")
        .map(|clause| {
            let rest = clause.strip_prefix("node ").ok_or_else(bad)?;
            let (a, rest) = rest.split_once(" and node ").ok_or_else(bad)?;
            let b = rest.strip_suffix(" is connected").ok_or_else(bad)?;
            Ok((
                name_index(a).ok_or_else(bad)?,
                name_index(b).ok_or_else(bad)?,
            ))
        })
        .collect()
}

pub fn gen_descmatch_records(
    graphs: &[Graph],
    assignments: &[TokenAssignment],
    strategy: ImportanceStrategy,
) -> Result<Vec<QaRecord>, CorpusError> {
    let by_id: BTreeMap<&str, &TokenAssignment> = assignments
        .iter()
        .map(|a| (a.graph_id.as_str(), a))
        .collect();
    graphs
        .iter()
        .map(|g| {
            let a = by_id
                .get(g.id())
                .ok_or_else(|| CorpusError::MissingAssignment(g.id().to_string()))?;
            Ok(QaRecord {
                kind: QaKind::Descmatch,
                question: describe_graph(g, strategy)?,
                answer: a.graph_token.to_string(),
                provenance: vec![g.id().to_string()],
                split: DEFAULT_SPLIT.into(),
            })
        })
        .collect()
}

/// Sorted by kind, then provenance, in the JSONL corpus format.
pub fn write_corpus<W: Write>(records: &[QaRecord], mut out: W) -> Result<(), CorpusError> {
    let mut sorted: Vec<&QaRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then_with(|| a.provenance.cmp(&b.provenance))
    });
    for r in sorted {
        serde_json::to_writer(&mut out, r).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus(text: &str) -> Result<Vec<QaRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Tokens mentioned in `text`, in order.
pub fn tokens_in(text: &str) -> Vec<StructuralToken> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("<SOG_") {
        let tail = &rest[start..];
        match tail.find('>') {
            Some(end) => {
                if let Ok(t) = tail[..=end].parse() {
                    out.push(t);
                }
                rest = &tail[end + 1..];
            }
            None => break,
        }
    }
    out
}
