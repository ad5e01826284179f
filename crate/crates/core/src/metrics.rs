//! Answer parsing, classification metrics and the token analysis exports.

use std::collections::BTreeMap;
use std::io::{self, Write};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{permute, Graph};
use crate::model::Codebook;
use crate::train::{TokenizerModel, TrainError};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("AUC needs both classes; found {positives} positive and {negatives} negative labels")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("length mismatch: {predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("first_m = {m} exceeds codebook size {k}")]
    TooManyEntries { m: usize, k: usize },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSets {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

impl Default for PhraseSets {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            positive: v(&["yes", "true", "active", "approved"]),
            negative: v(&["no", "false", "inactive", "rejected", "not approved"]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnswerValue {
    Positive,
    Negative,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub value: AnswerValue,
    pub matched: Option<String>,
}

/// Byte offset of the first whole-word occurrence of `phrase` in `text`.
fn find_phrase(text: &str, phrase: &str) -> Option<usize> {
    if phrase.is_empty() {
        return None;
    }
    let boundary = |c: Option<char>| !c.is_some_and(|c| c.is_alphanumeric());
    let mut from = 0;
    while let Some(off) = text[from..].find(phrase) {
        let start = from + off;
        let end = start + phrase.len();
        if boundary(text[..start].chars().next_back()) && boundary(text[end..].chars().next()) {
            return Some(start);
        }
        from = start + text[start..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

/// Negative phrases are checked before positive ones; matching is
/// case-insensitive on whole words.
pub fn parse_answer(text: &str, sets: &PhraseSets) -> ParsedAnswer {
    let lower = text.to_lowercase();
    for (value, phrases) in [
        (AnswerValue::Negative, &sets.negative),
        (AnswerValue::Positive, &sets.positive),
    ] {
        if let Some(p) = phrases
            .iter()
            .find(|p| find_phrase(&lower, &p.to_lowercase()).is_some())
        {
            return ParsedAnswer {
                value,
                matched: Some(p.clone()),
            };
        }
    }
    ParsedAnswer {
        value: AnswerValue::Unknown,
        matched: None,
    }
}

/// Index of the answer mentioned earliest in `text` (longest on ties).
pub fn parse_choice(text: &str, answers: &[String]) -> Option<usize> {
    let lower = text.to_lowercase();
    answers
        .iter()
        .enumerate()
        .filter_map(|(i, a)| {
            find_phrase(&lower, &a.to_lowercase()).map(|pos| (pos, std::cmp::Reverse(a.len()), i))
        })
        .min()
        .map(|(_, _, i)| i)
}

pub fn answer_score(value: AnswerValue) -> f64 {
    match value {
        AnswerValue::Positive => 1.0,
        AnswerValue::Negative => 0.0,
        AnswerValue::Unknown => 0.5,
    }
}

/// Tie-aware ROC AUC via midranks: equals the fraction of positive/negative
/// pairs ranked correctly, ties counting one half.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            predictions: scores.len(),
            labels: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::DegenerateLabels {
            positives,
            negatives,
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum keeps midranks integral
    let mut pos_rank2: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid2 = (i + 1 + j + 1) as u128;
        let pos_in_group = idx[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        pos_rank2 += mid2 * pos_in_group;
        i = j + 1;
    }
    let p = positives as u128;
    let u2 = pos_rank2 - p * (p + 1);
    Ok(u2 as f64 / (2.0 * positives as f64 * negatives as f64))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub accuracy: f64,
    /// Positive-class F1 for two classes, micro-averaged F1 otherwise.
    pub micro_f1: f64,
    pub unknown: usize,
    pub per_class: Vec<ClassCounts>,
    pub auc: Option<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// `None` predictions are Unknown: wrong for accuracy, a false negative for
/// the true class, and neither a false positive nor a true negative for any class.
pub fn accuracy_and_f1(
    predictions: &[Option<usize>],
    labels: &[usize],
    classes: usize,
) -> Result<MetricReport, MetricError> {
    if predictions.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut per_class = vec![ClassCounts::default(); classes];
    let mut correct = 0;
    let mut unknown = 0;
    for (&pred, &y) in predictions.iter().zip(labels) {
        if pred.is_none() {
            unknown += 1;
        }
        if pred == Some(y) {
            correct += 1;
        }
        for (k, c) in per_class.iter_mut().enumerate() {
            match (pred == Some(k), y == k) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) if pred.is_some() => c.tn += 1,
                (false, false) => {}
            }
        }
    }
    let micro_f1 = if classes == 2 {
        let c = per_class[1];
        f1_from_counts(c.tp, c.fp, c.fn_)
    } else {
        let sum = |f: fn(&ClassCounts) -> usize| per_class.iter().map(f).sum::<usize>();
        f1_from_counts(sum(|c| c.tp), sum(|c| c.fp), sum(|c| c.fn_))
    };
    Ok(MetricReport {
        n: labels.len(),
        accuracy: ratio(correct, labels.len()),
        micro_f1,
        unknown,
        per_class,
        auc: None,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Multi-task summary: mean of task means, and the root mean square of task
/// standard deviations.
pub fn aggregate_tasks(per_task: &[(f64, f64)]) -> (f64, f64) {
    if per_task.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = per_task.len() as f64;
    let mean = per_task.iter().map(|t| t.0).sum::<f64>() / n;
    let std = (per_task.iter().map(|t| t.1 * t.1).sum::<f64>() / n).sqrt();
    (mean, std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub trials: usize,
    pub agreements: usize,
    pub rate: f64,
    /// Graphs whose ranking needed the index fallback.
    pub non_strict_graphs: usize,
}

/// Fraction of (graph, seeded random relabeling) pairs keeping the graph token.
pub fn permutation_consistency(
    model: &TokenizerModel,
    graphs: &[Graph],
    trials: usize,
    seed: u64,
) -> Result<ConsistencyReport, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agreements = 0;
    let mut total = 0;
    let mut non_strict = 0;
    for g in graphs {
        let enc = model.encode_graph(g)?;
        if !enc.strict {
            non_strict += 1;
        }
        let base = enc.indices[g.node_count()];
        for _ in 0..trials {
            let mut perm: Vec<usize> = (0..g.node_count()).collect();
            perm.shuffle(&mut rng);
            let relabeled = permute(g, &perm).map_err(|source| TrainError::Graph {
                id: g.id().to_string(),
                source,
            })?;
            total += 1;
            if model.assign_token(&relabeled)?.graph_token.0 == base {
                agreements += 1;
            }
        }
    }
    Ok(ConsistencyReport {
        trials: total,
        agreements,
        rate: ratio(agreements, total),
        non_strict_graphs: non_strict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaffoldReport {
    /// Buckets with at least two members.
    pub buckets: usize,
    pub mean_purity: f64,
    pub baseline_purity: f64,
    pub shuffles: usize,
}

/// One graph's scaffold group and token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaffoldItem {
    pub id: String,
    pub scaffold: usize,
    pub token: usize,
}

fn mean_bucket_purity(groups: &[Vec<usize>], tokens: &[usize]) -> f64 {
    let mut sum = 0.0;
    for members in groups {
        let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
        for &m in members {
            *freq.entry(tokens[m]).or_default() += 1;
        }
        sum += *freq.values().max().expect("non-empty bucket") as f64 / members.len() as f64;
    }
    sum / groups.len() as f64
}

/// Mean per-scaffold token purity against a seeded shuffled-token baseline.
pub fn scaffold_consistency(items: &[ScaffoldItem], shuffles: usize, seed: u64) -> ScaffoldReport {
    let mut sorted: Vec<&ScaffoldItem> = items.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut by_scaffold: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, it) in sorted.iter().enumerate() {
        by_scaffold.entry(it.scaffold).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = by_scaffold.into_values().filter(|m| m.len() >= 2).collect();
    if groups.is_empty() {
        return ScaffoldReport {
            buckets: 0,
            mean_purity: f64::NAN,
            baseline_purity: f64::NAN,
            shuffles,
        };
    }
    let mut tokens: Vec<usize> = sorted.iter().map(|it| it.token).collect();
    let mean_purity = mean_bucket_purity(&groups, &tokens);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..shuffles {
        tokens.shuffle(&mut rng);
        acc += mean_bucket_purity(&groups, &tokens);
    }
    ScaffoldReport {
        buckets: groups.len(),
        mean_purity,
        baseline_purity: if shuffles == 0 {
            f64::NAN
        } else {
            acc / shuffles as f64
        },
        shuffles,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub values: Array2<f64>,
    /// Entries with zero norm; their rows and columns are NaN.
    pub zero_norm: Vec<usize>,
}

/// Cosine similarity between the first `m` codebook entries.
pub fn codebook_correlation(cb: &Codebook, m: usize) -> Result<CorrelationMatrix, MetricError> {
    if m > cb.len() {
        return Err(MetricError::TooManyEntries { m, k: cb.len() });
    }
    let norms: Vec<f64> = (0..m)
        .map(|i| cb.entry(i).dot(&cb.entry(i)).sqrt())
        .collect();
    let zero_norm: Vec<usize> = (0..m).filter(|&i| norms[i] == 0.0).collect();
    for &i in &zero_norm {
        log::warn!("codebook entry {i} has zero norm");
    }
    let values = Array2::from_shape_fn((m, m), |(i, j)| {
        if norms[i] == 0.0 || norms[j] == 0.0 {
            f64::NAN
        } else if i == j {
            1.0
        } else {
            (cb.entry(i).dot(&cb.entry(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
        }
    });
    Ok(CorrelationMatrix { values, zero_norm })
}

/// Nine significant digits.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn write_correlation_csv<W: Write>(m: &CorrelationMatrix, out: W) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_writer(out);
    let n = m.values.nrows();
    let mut header = vec!["entry".to_string()];
    header.extend((0..n).map(|j| j.to_string()));
    w.write_record(&header)?;
    for i in 0..n {
        let mut row = vec![i.to_string()];
        row.extend(m.values.row(i).iter().map(|&v| fmt_sig9(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per graph: id, graph token index, global-node latent.
pub fn export_embeddings<W: Write>(
    model: &TokenizerModel,
    graphs: &[Graph],
    out: W,
) -> Result<(), MetricError> {
    let d = model.params.encoder.output_dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "token".to_string()];
    header.extend((0..d).map(|j| format!("h{j}")));
    w.write_record(&header)?;
    for g in graphs {
        let enc = model.encode_graph(g)?;
        let n = g.node_count();
        let mut row = vec![g.id().to_string(), enc.indices[n].to_string()];
        row.extend(enc.latent.row(n).iter().map(|&v| fmt_sig9(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One line of a response file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    /// Every response carried a probability.
    Probability,
    /// Scores derived from parsed answers.
    Parsed,
}

/// Evaluates a binary task. Scores come from the responses when all of them
/// carry one, otherwise from the parsed answers.
pub fn evaluate_binary(
    responses: &[ResponseRecord],
    labels: &[bool],
    sets: &PhraseSets,
) -> Result<(MetricReport, ScoreSource), MetricError> {
    if responses.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            predictions: responses.len(),
            labels: labels.len(),
        });
    }
    let parsed: Vec<AnswerValue> = responses
        .iter()
        .map(|r| parse_answer(&r.text, sets).value)
        .collect();
    let preds: Vec<Option<usize>> = parsed
        .iter()
        .map(|v| match v {
            AnswerValue::Positive => Some(1),
            AnswerValue::Negative => Some(0),
            AnswerValue::Unknown => None,
        })
        .collect();
    let ys: Vec<usize> = labels.iter().map(|&l| usize::from(l)).collect();
    let mut report = accuracy_and_f1(&preds, &ys, 2)?;
    let (scores, source) = if !responses.is_empty() && responses.iter().all(|r| r.score.is_some()) {
        (
            responses
                .iter()
                .map(|r| r.score.unwrap())
                .collect::<Vec<_>>(),
            ScoreSource::Probability,
        )
    } else {
        (
            parsed.iter().map(|&v| answer_score(v)).collect(),
            ScoreSource::Parsed,
        )
    };
    report.auc = match auc_roc(&scores, labels) {
        Ok(a) => Some(a),
        Err(MetricError::DegenerateLabels { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok((report, source))
}

pub const REPORT_HEADER: [&str; 11] = [
    "task",
    "auc",
    "accuracy",
    "micro_f1",
    "n",
    "tp",
    "fp",
    "tn",
    "fn",
    "unknown",
    "score_source",
];

pub fn write_report_csv<W: Write>(
    rows: &[(String, MetricReport, ScoreSource)],
    out: W,
) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for (task, r, src) in rows {
        let c = r.per_class.get(1).copied().unwrap_or_default();
        w.write_record([
            task.clone(),
            r.auc.map_or_else(|| "NA".into(), fmt_sig9),
            fmt_sig9(r.accuracy),
            fmt_sig9(r.micro_f1),
            r.n.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.tn.to_string(),
            c.fn_.to_string(),
            r.unknown.to_string(),
            match src {
                ScoreSource::Probability => "probability".into(),
                ScoreSource::Parsed => "parsed".into(),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}
