use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sogtok_core::attributes::{ImportanceStrategy, DEFAULT_FEATURE_DIM, DEFAULT_HASH_SEED};
use sogtok_core::corpus::QaKind;
use sogtok_core::model::ReconstructionMode;
use sogtok_core::prompt::BalancePolicy;
use sogtok_core::DEFAULT_MAX_NODES;

#[derive(Debug, Parser)]
#[command(name = "sogtok", version, about = "Graph structural tokenizer")]
pub struct Cli {
    /// Worker threads for per-graph work. Results are merged in id order.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the tokenizer and write checkpoints.
    Train(TrainArgs),
    /// Assign graph-level or node-level tokens.
    Tokenize(TokenizeArgs),
    /// Generate the structure QA corpus.
    GenCorpus(CorpusArgs),
    /// Render task prompts into train/valid/test files.
    GenPrompts(PromptArgs),
    /// Score model responses against labels.
    Eval(EvalArgs),
    /// Codebook correlation, embedding export and consistency reports.
    Stats(StatsArgs),
    /// Re-run the command recorded in a manifest and verify its outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Degree,
    Pagerank,
    Betweenness,
    Random,
}

impl Anchor {
    pub fn strategy(self, seed: u64) -> ImportanceStrategy {
        match self {
            Self::Degree => ImportanceStrategy::Degree,
            Self::Pagerank => ImportanceStrategy::PageRank,
            Self::Betweenness => ImportanceStrategy::Betweenness,
            Self::Random => ImportanceStrategy::Random { seed },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reconstruction {
    Frobenius,
    Logistic,
}

impl From<Reconstruction> for ReconstructionMode {
    fn from(r: Reconstruction) -> Self {
        match r {
            Reconstruction::Frobenius => ReconstructionMode::Frobenius,
            Reconstruction::Logistic => ReconstructionMode::Logistic,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Graph file (one JSON record per line). Repeat to pool datasets.
    #[arg(long = "data", required = true)]
    pub data: Vec<PathBuf>,
    /// `id,label` CSV overriding graph labels.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub seed: u64,
    /// Codebook size.
    #[arg(long, default_value_t = 256)]
    pub k: usize,
    #[arg(long, default_value_t = 0.25)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = Anchor::Degree)]
    pub anchor: Anchor,
    #[arg(long, default_value_t = 10)]
    pub warmup_epochs: usize,
    /// Joint-phase epochs.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub lr_warmup: f64,
    #[arg(long, default_value_t = 5e-2)]
    pub lr_gcn: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lr_codebook: f64,
    #[arg(long, default_value_t = DEFAULT_FEATURE_DIM)]
    pub feature_dim: usize,
    /// Defaults to the feature dimension.
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 16)]
    pub recon_dim: usize,
    /// Graphs per minibatch; full batch when omitted.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = Reconstruction::Frobenius)]
    pub reconstruction: Reconstruction,
    /// Drop the straight-through gradient path into the encoder.
    #[arg(long)]
    pub no_straight_through: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_NODES)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = DEFAULT_HASH_SEED)]
    pub hash_seed: u64,
    /// Tab-separated `attribute<TAB>v1,v2,...` table replacing feature hashing.
    #[arg(long)]
    pub embedding_table: Option<PathBuf>,
    /// Write a checkpoint every N epochs (0 disables).
    #[arg(long, default_value_t = 10)]
    pub save_every: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TokenizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Tokenize ego-graphs around nodes instead of whole graphs.
    #[arg(long)]
    pub node_level: bool,
    #[arg(long, default_value_t = 2)]
    pub hops: usize,
    /// `id,node` CSV of centers; every node when omitted.
    #[arg(long, requires = "node_level")]
    pub nodes: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CorpusArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "knn,simjudge,descmatch")]
    pub kinds: Vec<QaKind>,
    #[arg(long)]
    pub seed: u64,
    /// Neighbors listed per knn record.
    #[arg(long, default_value_t = 5)]
    pub knn_k: usize,
    /// Simjudge pairs; defaults to 4 x K.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long, default_value_t = 0.8, allow_hyphen_values = true)]
    pub tau_pos: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub tau_neg: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Random,
    Scaffold,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PromptArgs {
    /// Token table written by `tokenize`.
    #[arg(long)]
    pub tokens: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub task: String,
    /// Directory with `tasks.json` and templates; built-in set when omitted.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value = "none", value_parser = parse_policy)]
    pub balance: BalancePolicy,
    #[arg(long, value_enum, default_value_t = SplitMode::Random)]
    pub split: SplitMode,
    #[arg(long)]
    pub seed: u64,
    /// Node-level prompts; `--tokens` is then a node token table.
    #[arg(long)]
    pub node_level: bool,
    /// `id#node,label` CSV for node-level prompts.
    #[arg(long, requires = "node_level")]
    pub node_labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_policy(s: &str) -> Result<BalancePolicy, String> {
    s.parse()
        .map_err(|e: sogtok_core::prompt::PromptError| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// JSONL lines with `id`, `text` and optional `score`.
    #[arg(long)]
    pub responses: PathBuf,
    /// Prompt file holding the reference answers.
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Size of the codebook correlation block; the first 50 entries (or all of K) when omitted.
    #[arg(long)]
    pub corr_first: Option<usize>,
    /// Relabelings per graph for the permutation report.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Shuffles for the scaffold baseline.
    #[arg(long, default_value_t = 100)]
    pub shuffles: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; the recorded one when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
