use std::collections::{BTreeMap, HashMap};
use std::hash::Hasher;

use fnv::FnvHasher;
use ndarray::Array2;
use thiserror::Error;

use super::assign::StructuralAttributeMap;

pub const DEFAULT_FEATURE_DIM: usize = 64;
pub const DEFAULT_HASH_SEED: u64 = 0x5347_544f_4b31_0001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("embedding dimension mismatch: expected {expected}, found {found}{}", .context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: Option<String>,
    },
    #[error("no embedding for attribute {0:?}")]
    UnknownAttribute(String),
    #[error("embedding table line {line}: {message}")]
    TableSyntax { line: usize, message: String },
}

/// Maps attribute strings to fixed-size vectors.
pub trait AttributeEmbedder {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Signed feature hashing of whitespace/`#`-separated tokens, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            seed: DEFAULT_HASH_SEED,
        }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_FEATURE_DIM)
    }
}

pub fn attribute_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| c.is_whitespace() || c == '#')
        .filter(|t| !t.is_empty())
}

impl AttributeEmbedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut v = vec![0.0; self.dim];
        for token in attribute_tokens(text) {
            let mut h = FnvHasher::with_key(self.seed);
            h.write(token.as_bytes());
            let h = h.finish();
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[bucket] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Precomputed embeddings keyed by attribute string.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEmbedder {
    dim: usize,
    table: BTreeMap<String, Vec<f64>>,
}

impl TableEmbedder {
    pub fn new(dim: usize, table: BTreeMap<String, Vec<f64>>) -> Result<Self, EmbedError> {
        for (key, v) in &table {
            if v.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                    context: Some(format!("entry {key:?}")),
                });
            }
        }
        Ok(Self { dim, table })
    }

    /// Parses `attribute<TAB>comma-separated floats` lines; every row must have `dim` values.
    pub fn parse(text: &str, dim: usize) -> Result<Self, EmbedError> {
        let mut table = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (key, values) = line.split_once('\t').ok_or(EmbedError::TableSyntax {
                line: line_no,
                message: "expected `attribute<TAB>values`".into(),
            })?;
            let vector = values
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbedError::TableSyntax {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if vector.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: dim,
                    found: vector.len(),
                    context: Some(format!("line {line_no}")),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::TableSyntax {
                    line: line_no,
                    message: "non-finite value".into(),
                });
            }
            table.insert(key.to_string(), vector);
        }
        Ok(Self { dim, table })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.table.iter()
    }
}

impl AttributeEmbedder for TableEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| EmbedError::UnknownAttribute(text.to_string()))
    }
}

/// The embedders a model can carry.
#[derive(Debug, Clone, PartialEq)]
pub enum Embedder {
    Hashing(HashingEmbedder),
    Table(TableEmbedder),
}

impl Default for Embedder {
    fn default() -> Self {
        Self::Hashing(HashingEmbedder::default())
    }
}

impl AttributeEmbedder for Embedder {
    fn dim(&self) -> usize {
        match self {
            Self::Hashing(h) => h.dim(),
            Self::Table(t) => t.dim(),
        }
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        match self {
            Self::Hashing(h) => h.embed(text),
            Self::Table(t) => t.embed(text),
        }
    }
}

/// Node feature rows for an augmented graph: one row per node, global node last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(pub Array2<f64>);

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Embeds every attribute string (global last). Identical strings share one lookup.
pub fn embed_attributes(
    attrs: &StructuralAttributeMap,
    embedder: &dyn AttributeEmbedder,
) -> Result<FeatureMatrix, EmbedError> {
    embed_strings(attrs.strings(), attrs.node_count() + 1, embedder)
}

/// Embeds node attributes only, without a global row.
pub fn embed_node_attributes(
    attrs: &StructuralAttributeMap,
    embedder: &dyn AttributeEmbedder,
) -> Result<FeatureMatrix, EmbedError> {
    embed_strings(
        attrs.attribute_of.iter().map(String::as_str),
        attrs.node_count(),
        embedder,
    )
}

fn embed_strings<'a>(
    strings: impl Iterator<Item = &'a str>,
    rows: usize,
    embedder: &dyn AttributeEmbedder,
) -> Result<FeatureMatrix, EmbedError> {
    let dim = embedder.dim();
    let mut out = Array2::zeros((rows, dim));
    let mut cache: HashMap<&str, Vec<f64>> = HashMap::new();
    for (i, s) in strings.enumerate() {
        if !cache.contains_key(s) {
            let v = embedder.embed(s)?;
            if v.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                    context: Some(format!("attribute {s:?}")),
                });
            }
            cache.insert(s, v);
        }
        for (j, x) in cache[s].iter().enumerate() {
            out[[i, j]] = *x;
        }
    }
    Ok(FeatureMatrix(out))
}
