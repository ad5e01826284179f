//! Two-phase tokenizer training and token assignment.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{
    assign_attributes, AttributeEmbedder, AttributeError, EmbedError, Embedder, FeatureMatrix,
    HashingEmbedder, ImportanceStrategy, StructuralAttributeMap, DEFAULT_FEATURE_DIM,
    DEFAULT_HASH_SEED,
};
use crate::graph::{
    augment_with_global_node, build_adjacency, ego_graph, permute, Graph, GraphError,
    DEFAULT_MAX_NODES,
};
use crate::model::{
    adam_step, backward, encode_traced, forward, kmeans_codebook, quantize, AdamConfig, AdamState,
    BatchState, Codebook, DecoderParams, EncoderParams, GraphInput, LossBreakdown, LossOptions,
    ModelError, Phase, ReconstructionMode, VqParams, GAUSSIAN_INIT_STD, KMEANS_ITERS,
};
use crate::token::{StructuralToken, TokenAssignment};

/// Upper bound on latent rows fed to codebook k-means.
pub const KMEANS_SAMPLE_CAP: usize = 20_000;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("graph {id}: {source}")]
    Graph { id: String, source: GraphError },
    #[error("graph {id}: {source}")]
    Attribute { id: String, source: AttributeError },
    #[error("graph {id}: {source}")]
    Embed { id: String, source: EmbedError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("epoch callback failed: {0}")]
    Callback(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub k: usize,
    pub beta: f64,
    pub warmup_epochs: usize,
    pub joint_epochs: usize,
    pub lr_warmup: f64,
    pub lr_gcn: f64,
    pub lr_codebook: f64,
    pub strategy: ImportanceStrategy,
    pub seed: u64,
    pub feature_dim: usize,
    /// Defaults to `feature_dim`.
    pub hidden_dim: Option<usize>,
    pub latent_dim: usize,
    pub recon_dim: usize,
    /// Full batch when `None`.
    pub batch_size: Option<usize>,
    pub reconstruction: ReconstructionMode,
    pub straight_through: bool,
    pub max_nodes: usize,
    pub hash_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 256,
            beta: 0.25,
            warmup_epochs: 10,
            joint_epochs: 50,
            lr_warmup: 1e-2,
            lr_gcn: 5e-2,
            lr_codebook: 0.5,
            strategy: ImportanceStrategy::Degree,
            seed: 0,
            feature_dim: DEFAULT_FEATURE_DIM,
            hidden_dim: None,
            latent_dim: 64,
            recon_dim: 16,
            batch_size: None,
            reconstruction: ReconstructionMode::Frobenius,
            straight_through: true,
            max_nodes: DEFAULT_MAX_NODES,
            hash_seed: DEFAULT_HASH_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::Config(m));
        if self.k < 2 {
            return fail(format!("K must be at least 2, got {}", self.k));
        }
        for (name, lr) in [
            ("lr_warmup", self.lr_warmup),
            ("lr_gcn", self.lr_gcn),
            ("lr_codebook", self.lr_codebook),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return fail(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        if self.feature_dim == 0
            || self.latent_dim == 0
            || self.recon_dim == 0
            || self.hidden_dim == Some(0)
        {
            return fail("dimensions must be positive".into());
        }
        if self.batch_size == Some(0) {
            return fail("batch size must be positive".into());
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.hidden_dim.unwrap_or(self.feature_dim)
    }

    pub fn loss_options(&self) -> LossOptions {
        LossOptions {
            beta: self.beta,
            mode: self.reconstruction,
            straight_through: self.straight_through,
        }
    }
}

/// Everything needed to map a graph to its token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerModel {
    pub strategy: ImportanceStrategy,
    pub embedder: Embedder,
    pub params: VqParams,
    pub loss: LossOptions,
    pub max_nodes: usize,
    pub seed: u64,
}

/// A graph laid out in canonical (hop, rank) order, ready for the encoder.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub input: GraphInput,
    /// `order[p]` is the source node at canonical position `p`.
    pub order: Vec<usize>,
    pub strict: bool,
}

impl PreparedGraph {
    /// Canonical row of each source node.
    pub fn position_of(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &v) in self.order.iter().enumerate() {
            pos[v] = p;
        }
        pos
    }
}

/// Latents and codebook indices for one graph, rows in source node order
/// followed by the global row when present.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoding {
    pub latent: Array2<f64>,
    pub indices: Vec<usize>,
    pub strict: bool,
}

fn canonical_attributes(
    g: &Graph,
    attrs: &StructuralAttributeMap,
) -> Result<(Graph, Vec<usize>), GraphError> {
    let order = attrs.rank_order();
    let mut perm = vec![0; order.len()];
    for (p, &v) in order.iter().enumerate() {
        perm[v] = p;
    }
    Ok((permute(g, &perm)?, order))
}

impl TokenizerModel {
    /// Seeded initial weights; the codebook starts Gaussian.
    pub fn init(
        cfg: &TrainConfig,
        embedder: Embedder,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if embedder.dim() != cfg.feature_dim {
            return Err(TrainError::Config(format!(
                "embedder dimension {} differs from feature_dim {}",
                embedder.dim(),
                cfg.feature_dim
            )));
        }
        let encoder = EncoderParams::glorot(cfg.feature_dim, cfg.hidden(), cfg.latent_dim, rng);
        let decoder = DecoderParams::glorot(cfg.latent_dim, cfg.recon_dim, rng);
        let codebook = Codebook::gaussian(cfg.k, cfg.latent_dim, GAUSSIAN_INIT_STD, rng);
        Ok(Self {
            strategy: cfg.strategy,
            embedder,
            params: VqParams {
                encoder,
                decoder,
                codebook,
            },
            loss: cfg.loss_options(),
            max_nodes: cfg.max_nodes,
            seed: cfg.seed,
        })
    }

    pub fn k(&self) -> usize {
        self.params.codebook.len()
    }

    /// Attributes, canonical ordering and features. With `augment`, a global
    /// node is appended after the canonical nodes.
    pub fn prepare(&self, g: &Graph, augment: bool) -> Result<PreparedGraph, TrainError> {
        let id = || g.id().to_string();
        g.check_size(self.max_nodes)
            .map_err(|source| TrainError::Graph { id: id(), source })?;
        let attrs = assign_attributes(g, self.strategy)
            .map_err(|source| TrainError::Attribute { id: id(), source })?;
        let (canon, order) = canonical_attributes(g, &attrs)
            .map_err(|source| TrainError::Graph { id: id(), source })?;
        let mut strings: Vec<&str> = order
            .iter()
            .map(|&v| attrs.attribute_of[v].as_str())
            .collect();
        let adjacency = if augment {
            strings.push(attrs.global_attribute.as_str());
            let aug = augment_with_global_node(&canon)
                .map_err(|source| TrainError::Graph { id: id(), source })?;
            build_adjacency(&aug)
        } else {
            build_adjacency(&canon)
        };
        let features = embed_rows(&strings, &self.embedder)
            .map_err(|source| TrainError::Embed { id: id(), source })?;
        Ok(PreparedGraph {
            input: GraphInput::new(&adjacency, features.0)?,
            order,
            strict: attrs.strict,
        })
    }

    /// Encodes and quantizes the augmented graph.
    pub fn encode_graph(&self, g: &Graph) -> Result<GraphEncoding, TrainError> {
        let prep = self.prepare(g, true)?;
        let h = encode_traced(
            &prep.input.a_norm,
            &prep.input.features,
            &self.params.encoder,
        )?
        .latent;
        let sel = quantize(&h, &self.params.codebook)?;
        let n = prep.order.len();
        let mut rows: Vec<usize> = prep.position_of();
        rows.push(n);
        Ok(GraphEncoding {
            latent: h.select(Axis(0), &rows),
            indices: rows.iter().map(|&r| sel.indices[r]).collect(),
            strict: prep.strict,
        })
    }

    /// Graph token from the global row, node tokens from the rest.
    pub fn assign_token(&self, g: &Graph) -> Result<TokenAssignment, TrainError> {
        let enc = self.encode_graph(g)?;
        let n = g.node_count();
        Ok(TokenAssignment {
            graph_id: g.id().to_string(),
            graph_token: StructuralToken(enc.indices[n]),
            node_tokens: enc.indices[..n]
                .iter()
                .map(|&k| StructuralToken(k))
                .collect(),
        })
    }

    /// Token of `center` computed on its `hops`-hop ego graph without a global node.
    pub fn assign_node_token(
        &self,
        g: &Graph,
        center: usize,
        hops: usize,
    ) -> Result<StructuralToken, TrainError> {
        let ego = ego_graph(g, center, hops).map_err(|source| TrainError::Graph {
            id: g.id().to_string(),
            source,
        })?;
        let prep = self.prepare(&ego.graph, false)?;
        let h = encode_traced(
            &prep.input.a_norm,
            &prep.input.features,
            &self.params.encoder,
        )?
        .latent;
        let sel = quantize(&h, &self.params.codebook)?;
        Ok(StructuralToken(sel.indices[prep.position_of()[0]]))
    }
}

fn embed_rows(strings: &[&str], embedder: &Embedder) -> Result<FeatureMatrix, EmbedError> {
    let mut out = Array2::zeros((strings.len(), embedder.dim()));
    let mut cache: std::collections::HashMap<&str, Vec<f64>> = Default::default();
    for (i, s) in strings.iter().enumerate() {
        if !cache.contains_key(s) {
            let v = embedder.embed(s)?;
            if v.len() != embedder.dim() {
                return Err(EmbedError::DimensionMismatch {
                    expected: embedder.dim(),
                    found: v.len(),
                    context: Some(format!("attribute {s:?}")),
                });
            }
            cache.insert(s, v);
        }
        out.row_mut(i)
            .assign(&ndarray::ArrayView1::from(&cache[s][..]));
    }
    Ok(FeatureMatrix(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseName {
    Warmup,
    Joint,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: PhaseName,
    pub recon: f64,
    pub update: f64,
    pub commit: f64,
    pub total: f64,
    pub utilization: f64,
    pub dead_entries: usize,
}

impl EpochRecord {
    pub const HEADER: &'static str =
        "epoch\tphase\trecon\tupdate\tcommit\ttotal\tutilization\tdead_entries";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.6}\t{}",
            self.epoch,
            match self.phase {
                PhaseName::Warmup => "warmup",
                PhaseName::Joint => "joint",
            },
            self.recon,
            self.update,
            self.commit,
            self.total,
            self.utilization,
            self.dead_entries
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: TokenizerModel,
    pub log: Vec<EpochRecord>,
}

pub fn train(dataset: &[Graph], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let embedder = Embedder::Hashing(HashingEmbedder {
        dim: cfg.feature_dim,
        seed: cfg.hash_seed,
    });
    train_with(dataset, cfg, embedder, |_, _| Ok(()))
}

/// Trains from a seeded initialization. `on_epoch` sees each epoch's record
/// and the model after that epoch's updates.
pub fn train_with<F>(
    dataset: &[Graph],
    cfg: &TrainConfig,
    embedder: Embedder,
    mut on_epoch: F,
) -> Result<TrainOutcome, TrainError>
where
    F: FnMut(&EpochRecord, &TokenizerModel) -> Result<(), TrainError>,
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = TokenizerModel::init(cfg, embedder, &mut rng)?;
    let inputs: Vec<GraphInput> = dataset
        .iter()
        .map(|g| model.prepare(g, true).map(|p| p.input))
        .collect::<Result<_, _>>()?;
    let opts = cfg.loss_options();
    let mut log = Vec::with_capacity(cfg.warmup_epochs + cfg.joint_epochs);

    let gcn_shapes = [
        model.params.encoder.w1.dim(),
        model.params.encoder.w2.dim(),
        model.params.decoder.wd.dim(),
    ];
    let mut warm_state = AdamState::new(AdamConfig::default(), &gcn_shapes);
    for epoch in 0..cfg.warmup_epochs {
        let record = run_epoch(
            &mut model,
            &inputs,
            Phase::Warmup,
            cfg,
            &opts,
            &mut rng,
            epoch,
            |m, g| {
                let p = &mut m.params;
                adam_step(
                    &mut [&mut p.encoder.w1, &mut p.encoder.w2, &mut p.decoder.wd],
                    &[&g.w1, &g.w2, &g.wd],
                    &mut warm_state,
                    cfg.lr_warmup,
                );
            },
        )?;
        on_epoch(&record, &model)?;
        log.push(record);
    }

    if cfg.warmup_epochs > 0 && cfg.joint_epochs > 0 {
        let points = collect_latents(&model, &inputs, &mut rng)?;
        model.params.codebook = kmeans_codebook(&points, cfg.k, KMEANS_ITERS, &mut rng)?;
    }

    let mut gcn_state = AdamState::new(AdamConfig::default(), &gcn_shapes);
    let mut cb_state = AdamState::new(
        AdamConfig::default(),
        &[model.params.codebook.entries.dim()],
    );
    for j in 0..cfg.joint_epochs {
        let epoch = cfg.warmup_epochs + j;
        let record = run_epoch(
            &mut model,
            &inputs,
            Phase::Joint,
            cfg,
            &opts,
            &mut rng,
            epoch,
            |m, g| {
                let p = &mut m.params;
                adam_step(
                    &mut [&mut p.encoder.w1, &mut p.encoder.w2, &mut p.decoder.wd],
                    &[&g.w1, &g.w2, &g.wd],
                    &mut gcn_state,
                    cfg.lr_gcn,
                );
                adam_step(
                    &mut [&mut p.codebook.entries],
                    &[&g.codebook],
                    &mut cb_state,
                    cfg.lr_codebook,
                );
            },
        )?;
        on_epoch(&record, &model)?;
        log.push(record);
    }
    Ok(TrainOutcome { model, log })
}

fn collect_latents(
    model: &TokenizerModel,
    inputs: &[GraphInput],
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>, TrainError> {
    let mut rows: Vec<Array2<f64>> = Vec::with_capacity(inputs.len());
    for input in inputs {
        rows.push(encode_traced(&input.a_norm, &input.features, &model.params.encoder)?.latent);
    }
    let views: Vec<_> = rows.iter().map(|a| a.view()).collect();
    let all =
        ndarray::concatenate(Axis(0), &views).map_err(|e| TrainError::Config(e.to_string()))?;
    if all.nrows() <= KMEANS_SAMPLE_CAP {
        return Ok(all);
    }
    let mut idx: Vec<usize> = (0..all.nrows()).collect();
    idx.shuffle(rng);
    idx.truncate(KMEANS_SAMPLE_CAP);
    idx.sort_unstable();
    Ok(all.select(Axis(0), &idx))
}

#[allow(clippy::too_many_arguments)]
fn run_epoch<S>(
    model: &mut TokenizerModel,
    inputs: &[GraphInput],
    phase: Phase,
    cfg: &TrainConfig,
    opts: &LossOptions,
    rng: &mut ChaCha8Rng,
    epoch: usize,
    mut step: S,
) -> Result<EpochRecord, TrainError>
where
    S: FnMut(&mut TokenizerModel, &crate::model::Gradients),
{
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let batch_size = match cfg.batch_size {
        Some(b) => {
            order.shuffle(rng);
            b
        }
        None => inputs.len(),
    };
    let k = model.k();
    let mut used = vec![false; k];
    let (mut recon, mut update, mut commit) = (0.0, 0.0, 0.0);
    for chunk in order.chunks(batch_size) {
        let mut batch = BatchState::default();
        for &i in chunk {
            let st = forward(&model.params, &inputs[i], phase, opts)?;
            let indices = match &st.selection {
                Some(sel) => sel.indices.clone(),
                None => quantize(st.latent(), &model.params.codebook)?.indices,
            };
            for ix in indices {
                used[ix] = true;
            }
            batch.states.push(st);
        }
        let mean = batch.mean_loss().expect("non-empty chunk");
        if !mean.is_finite() {
            return Err(non_finite(epoch, &mean));
        }
        recon += mean.reconstruction * chunk.len() as f64;
        update += mean.update * chunk.len() as f64;
        commit += mean.commitment * chunk.len() as f64;
        let grads = backward(&batch, &model.params, opts)?;
        drop(batch);
        step(model, &grads);
    }
    let n = inputs.len() as f64;
    let loss = LossBreakdown::new(recon / n, update / n, commit / n, opts.beta);
    if !loss.is_finite() {
        return Err(non_finite(epoch, &loss));
    }
    let live = used.iter().filter(|&&u| u).count();
    let record = EpochRecord {
        epoch,
        phase: match phase {
            Phase::Warmup => PhaseName::Warmup,
            Phase::Joint => PhaseName::Joint,
        },
        recon: loss.reconstruction,
        update: loss.update,
        commit: loss.commitment,
        total: loss.total,
        utilization: live as f64 / k as f64,
        dead_entries: k - live,
    };
    log::debug!("{}", record.to_tsv());
    Ok(record)
}

fn non_finite(epoch: usize, loss: &LossBreakdown) -> TrainError {
    TrainError::NonFiniteLoss {
        epoch,
        detail: format!(
            "recon={} update={} commit={}",
            loss.reconstruction, loss.update, loss.commitment
        ),
    }
}

/// Fraction of codebook entries selected at least once.
pub fn codebook_utilization(indices: impl IntoIterator<Item = usize>, k: usize) -> (f64, usize) {
    let mut used = vec![false; k];
    for i in indices {
        used[i] = true;
    }
    let live = used.iter().filter(|&&u| u).count();
    (live as f64 / k as f64, k - live)
}
