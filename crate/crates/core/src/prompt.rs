//! Downstream prompt rendering from data-file templates, class balancing and
//! split files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::token::StructuralToken;

pub const SLOT_SMILES: &str = "{{SMILES}}";
pub const SLOT_TEXT: &str = "{{TEXT}}";
pub const SLOT_SOG: &str = "{{SOG}}";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("graph {0} has no text for the template's text slot")]
    MissingText(String),
    #[error("graph {id} has no usable label for task {task}")]
    MissingLabel { id: String, task: String },
    #[error("template {id}: {message}")]
    Template { id: String, message: String },
    #[error("balancing policy {policy} applied to {split} split")]
    PolicyOnEvalSplit { policy: String, split: String },
    #[error("unknown balancing policy {0:?}")]
    UnknownPolicy(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TaskEntry {
    id: String,
    file: String,
    answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positive: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    negative: Option<Vec<String>>,
}

/// A prompt template with named slots. `answers[label]` is the target text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTemplate {
    pub id: String,
    pub text: String,
    pub answers: Vec<String>,
    /// Answer-parsing overrides; `None` means the default phrase sets.
    pub positive: Option<Vec<String>>,
    pub negative: Option<Vec<String>>,
}

impl TaskTemplate {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        answers: Vec<String>,
    ) -> Result<Self, PromptError> {
        let t = Self {
            id: id.into(),
            text: text.into(),
            answers,
            positive: None,
            negative: None,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), PromptError> {
        let err = |message: String| {
            Err(PromptError::Template {
                id: self.id.clone(),
                message,
            })
        };
        let count = |slot: &str| self.text.matches(slot).count();
        if count(SLOT_SOG) != 1 {
            return err(format!("expected exactly one {SLOT_SOG} slot"));
        }
        if count(SLOT_SMILES) + count(SLOT_TEXT) > 1 {
            return err("at most one text slot is allowed".into());
        }
        if self.answers.len() < 2 {
            return err("at least two answers are required".into());
        }
        Ok(())
    }

    pub fn has_text_slot(&self) -> bool {
        self.text.contains(SLOT_SMILES) || self.text.contains(SLOT_TEXT)
    }

    pub fn is_binary(&self) -> bool {
        self.answers.len() == 2
    }

    /// Substitutes the slots; `None` when the template has a text slot and
    /// `text` is absent.
    pub fn fill(&self, text: Option<&str>, token: StructuralToken) -> Option<String> {
        let mut out = self.text.replace(SLOT_SOG, &token.to_string());
        for slot in [SLOT_SMILES, SLOT_TEXT] {
            if out.contains(slot) {
                out = out.replace(slot, text?);
            }
        }
        Some(out)
    }
}

const BUILTIN_INDEX: &str = include_str!("../templates/tasks.json");

macro_rules! builtin_files {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../templates/", $name)))),*]
    };
}

const BUILTIN_FILES: &[(&str, &str)] = builtin_files!(
    "BBBP_p_np.tmpl",
    "Tox21_NR-AR.tmpl",
    "Tox21_NR-AR-LBD.tmpl",
    "Tox21_NR-AhR.tmpl",
    "Tox21_NR-Aromatase.tmpl",
    "Tox21_NR-ER.tmpl",
    "Tox21_NR-ER-LBD.tmpl",
    "Tox21_NR-PPAR-gamma.tmpl",
    "Tox21_SR-ARE.tmpl",
    "Tox21_SR-ATAD5.tmpl",
    "Tox21_SR-HSE.tmpl",
    "Tox21_SR-MMP.tmpl",
    "Tox21_SR-p53.tmpl",
    "ClinTox_FDA_APPROVED.tmpl",
    "ClinTox_CT_TOX.tmpl",
    "HIV_HIV_active.tmpl",
    "BACE_Class.tmpl",
    "Cora_node.tmpl",
);

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TemplateRegistry {
    tasks: BTreeMap<String, TaskTemplate>,
    order: Vec<String>,
}

impl TemplateRegistry {
    /// Templates compiled into the library.
    pub fn builtin() -> Self {
        let files: BTreeMap<&str, &str> = BUILTIN_FILES.iter().copied().collect();
        Self::from_index(BUILTIN_INDEX, |f| {
            files
                .get(f)
                .map(|s| s.to_string())
                .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, f.to_string()))
        })
        .expect("builtin templates are valid")
    }

    /// Loads `tasks.json` and its template files from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let index = fs::read_to_string(dir.join("tasks.json"))?;
        Self::from_index(&index, |f| fs::read_to_string(dir.join(f)))
    }

    fn from_index(
        index: &str,
        mut read: impl FnMut(&str) -> io::Result<String>,
    ) -> Result<Self, PromptError> {
        let entries: Vec<TaskEntry> = serde_json::from_str(index)?;
        let mut reg = Self::default();
        for e in entries {
            let mut t = TaskTemplate::new(e.id.clone(), read(&e.file)?, e.answers)?;
            t.positive = e.positive;
            t.negative = e.negative;
            reg.order.push(e.id.clone());
            reg.tasks.insert(e.id, t);
        }
        Ok(reg)
    }

    pub fn get(&self, id: &str) -> Result<&TaskTemplate, PromptError> {
        self.tasks
            .get(id)
            .ok_or_else(|| PromptError::UnknownTask(id.to_string()))
    }

    /// Task ids in index order.
    pub fn ids(&self) -> &[String] {
        &self.order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Valid => "valid",
            Self::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub prompt: String,
    pub answer: String,
    pub id: String,
    pub split: Split,
    #[serde(skip)]
    pub label: usize,
}

fn answer_for(
    tmpl: &TaskTemplate,
    id: &str,
    label: Option<i64>,
) -> Result<(usize, String), PromptError> {
    let missing = || PromptError::MissingLabel {
        id: id.to_string(),
        task: tmpl.id.clone(),
    };
    let label = usize::try_from(label.ok_or_else(missing)?).map_err(|_| missing())?;
    let answer = tmpl.answers.get(label).ok_or_else(missing)?.clone();
    Ok((label, answer))
}

/// Graph-level prompt; the text slot takes the graph's text (e.g. SMILES).
pub fn render_prompt(
    tmpl: &TaskTemplate,
    g: &Graph,
    tok: StructuralToken,
    split: Split,
) -> Result<PromptRecord, PromptError> {
    let prompt = tmpl
        .fill(g.graph_text(), tok)
        .ok_or_else(|| PromptError::MissingText(g.id().to_string()))?;
    let (label, answer) = answer_for(tmpl, g.id(), g.label())?;
    Ok(PromptRecord {
        prompt,
        answer,
        id: g.id().to_string(),
        split,
        label,
    })
}

/// Node-level prompt; the text slot takes the center node's text.
pub fn render_node_prompt(
    tmpl: &TaskTemplate,
    g: &Graph,
    center: usize,
    label: Option<i64>,
    tok: StructuralToken,
    split: Split,
) -> Result<PromptRecord, PromptError> {
    let id = format!("{}#{}", g.id(), center);
    let text = g.nodes().get(center).and_then(|n| n.text.as_deref());
    let prompt = tmpl
        .fill(text, tok)
        .ok_or_else(|| PromptError::MissingText(id.clone()))?;
    let (label, answer) = answer_for(tmpl, &id, label)?;
    Ok(PromptRecord {
        prompt,
        answer,
        id,
        split,
        label,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BalancePolicy {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "1:1")]
    OneToOne,
    #[serde(rename = "1:5")]
    OneToFive,
}

impl std::str::FromStr for BalancePolicy {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "1:1" => Ok(Self::OneToOne),
            "1:5" => Ok(Self::OneToFive),
            other => Err(PromptError::UnknownPolicy(other.to_string())),
        }
    }
}

impl std::fmt::Display for BalancePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::OneToOne => "1:1",
            Self::OneToFive => "1:5",
        })
    }
}

/// Rebalances training records. Every non-majority class is brought to the
/// majority count (1:1) or to one fifth of it (1:5, rounded up) by cyclic
/// duplication in seeded order, or by seeded subsampling when above target.
pub fn balance_split(
    records: &[PromptRecord],
    policy: BalancePolicy,
    seed: u64,
) -> Result<Vec<PromptRecord>, PromptError> {
    if policy == BalancePolicy::None {
        return Ok(records.to_vec());
    }
    if let Some(r) = records.iter().find(|r| r.split != Split::Train) {
        return Err(PromptError::PolicyOnEvalSplit {
            policy: policy.to_string(),
            split: r.split.name().into(),
        });
    }
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_label.entry(r.label).or_default().push(i);
    }
    let Some((&major_label, major)) = by_label
        .iter()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)))
    else {
        return Ok(Vec::new());
    };
    let majority = major.len();
    let target = match policy {
        BalancePolicy::OneToOne => majority,
        BalancePolicy::OneToFive => majority.div_ceil(5),
        BalancePolicy::None => unreachable!(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; records.len()];
    let mut extra = Vec::new();
    for (&label, members) in &by_label {
        if label == major_label {
            continue;
        }
        let mut order = members.clone();
        order.shuffle(&mut rng);
        if members.len() > target {
            for &i in &order[target..] {
                keep[i] = false;
            }
        } else {
            extra.extend(order.iter().cycle().take(target - members.len()).copied());
        }
    }
    let mut out: Vec<PromptRecord> = records
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    out.extend(extra.into_iter().map(|i| records[i].clone()));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptFilesManifest {
    pub task: String,
    pub policy: BalancePolicy,
    pub seed: u64,
    pub token_table_sha256: String,
    pub counts: BTreeMap<String, usize>,
}

fn write_jsonl<W: Write>(records: &[&PromptRecord], mut out: W) -> Result<(), PromptError> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes `train.jsonl`, `valid.jsonl`, `test.jsonl` and `prompts_manifest.json` under `dir`.
pub fn write_prompt_files(
    records: &[PromptRecord],
    dir: &Path,
    task: &str,
    policy: BalancePolicy,
    seed: u64,
    token_table_sha256: &str,
) -> Result<PromptFilesManifest, PromptError> {
    fs::create_dir_all(dir)?;
    let mut counts = BTreeMap::new();
    for split in Split::ALL {
        let part: Vec<&PromptRecord> = records.iter().filter(|r| r.split == split).collect();
        let mut buf = Vec::new();
        write_jsonl(&part, &mut buf)?;
        fs::write(dir.join(format!("{}.jsonl", split.name())), buf)?;
        counts.insert(split.name().to_string(), part.len());
    }
    let manifest = PromptFilesManifest {
        task: task.to_string(),
        policy,
        seed,
        token_table_sha256: token_table_sha256.to_string(),
        counts,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join("prompts_manifest.json"), text)?;
    Ok(manifest)
}
