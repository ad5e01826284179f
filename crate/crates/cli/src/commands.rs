use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sogtok_core::attributes::{Embedder, HashingEmbedder, TableEmbedder};
use sogtok_core::checkpoint::write_checkpoint;
use sogtok_core::corpus::{
    gen_descmatch_records, gen_knn_records, gen_simjudge_records, write_corpus, GraphEmbedding,
    QaKind, SimilarityThresholds, SimjudgeConfig,
};
use sogtok_core::ingest::{group_scaffolds, murcko_scaffold, read_label_csv, ScaffoldGrouping};
use sogtok_core::manifest::{sha256_file, RunManifest};
use sogtok_core::metrics::{
    accuracy_and_f1, codebook_correlation, evaluate_binary, export_embeddings, parse_choice,
    permutation_consistency, scaffold_consistency, write_correlation_csv, write_report_csv,
    PhraseSets, ResponseRecord, ScaffoldItem, ScoreSource,
};
use sogtok_core::prompt::{
    balance_split, render_node_prompt, render_prompt, write_prompt_files, PromptRecord, Split,
    TaskTemplate, TemplateRegistry,
};
use sogtok_core::token::{
    read_node_token_table, read_token_table, write_node_token_table, write_token_table,
    NodeTokenRecord,
};
use sogtok_core::train::{codebook_utilization, train_with, EpochRecord, TokenizerModel};
use sogtok_core::{Graph, StructuralToken, TrainConfig, TrainError};

use crate::args::{
    CorpusArgs, EvalArgs, PromptArgs, ReplayArgs, SplitMode, StatsArgs, TokenizeArgs, TrainArgs,
};
use crate::common::{load_graphs, load_model, read_input, thread_pool, Outputs, MANIFEST_FILE};
use crate::error::{CliError, Result};

pub const MODEL_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.tsv";
pub const TOKEN_FILE: &str = "tokens.tsv";
pub const NODE_TOKEN_FILE: &str = "node_tokens.tsv";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const REPORT_FILE: &str = "report.csv";
const DEFAULT_CORR_FIRST: usize = 50;

fn config_of<T: serde::Serialize>(args: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(args)?)
}

impl TrainArgs {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            k: self.k,
            beta: self.beta,
            warmup_epochs: self.warmup_epochs,
            joint_epochs: self.epochs,
            lr_warmup: self.lr_warmup,
            lr_gcn: self.lr_gcn,
            lr_codebook: self.lr_codebook,
            strategy: self.anchor.strategy(self.seed),
            seed: self.seed,
            feature_dim: self.feature_dim,
            hidden_dim: self.hidden_dim,
            latent_dim: self.latent_dim,
            recon_dim: self.recon_dim,
            batch_size: self.batch_size,
            reconstruction: self.reconstruction.into(),
            straight_through: !self.no_straight_through,
            max_nodes: self.max_nodes,
            hash_seed: self.hash_seed,
        }
    }
}

pub fn train(args: &TrainArgs) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("train", Some(args.seed), config_of(args)?);
    let graphs = load_graphs(&args.data, &mut manifest)?;
    let cfg = args.train_config();
    let embedder = match &args.embedding_table {
        Some(path) => {
            let text = String::from_utf8(read_input(path, &mut manifest)?)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            Embedder::Table(
                TableEmbedder::parse(&text, args.feature_dim)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?,
            )
        }
        None => Embedder::Hashing(HashingEmbedder {
            dim: args.feature_dim,
            seed: args.hash_seed,
        }),
    };
    let mut embedded = manifest.clone();
    if let Some(cfg) = embedded.config.as_object_mut() {
        cfg.remove("out");
    }
    let header = embedded.to_json();
    let mut outputs = Outputs::default();
    let mut log = format!("{}\n", EpochRecord::HEADER);
    let result = train_with(&graphs, &cfg, embedder, |rec, model| {
        log.push_str(&rec.to_tsv());
        log.push('\n');
        log::info!(
            "epoch {} {:?}: recon {:.6e} total {:.6e} utilization {:.3}",
            rec.epoch,
            rec.phase,
            rec.recon,
            rec.total,
            rec.utilization
        );
        let done = rec.epoch + 1;
        if args.save_every > 0 && done % args.save_every == 0 {
            let mut buf = Vec::new();
            write_checkpoint(model, &header, &mut buf)?;
            outputs.add(format!("checkpoints/epoch_{done:04}.ckpt"), buf);
        }
        Ok(())
    });
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            fs::create_dir_all(&args.out)?;
            fs::write(args.out.join(TRAIN_LOG_FILE), &log)?;
            return Err(e.into());
        }
    };
    let mut buf = Vec::new();
    write_checkpoint(&outcome.model, &header, &mut buf)?;
    outputs.add(MODEL_FILE, buf);
    outputs.add(TRAIN_LOG_FILE, log.into_bytes());
    outputs.finish(&args.out, manifest)
}

fn read_centers(path: &Path, manifest: &mut RunManifest) -> Result<Vec<(String, usize)>> {
    let bytes = read_input(path, manifest)?;
    let mut rdr = csv::Reader::from_reader(&bytes[..]);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let bad = |m: String| CliError::config(format!("{} line {}: {m}", path.display(), i + 2));
        let row = row.map_err(|e| bad(e.to_string()))?;
        let (Some(id), Some(node)) = (row.get(0), row.get(1)) else {
            return Err(bad("expected `id,node`".into()));
        };
        let node = node
            .trim()
            .parse()
            .map_err(|_| bad(format!("node {node:?} is not an index")))?;
        out.push((id.trim().to_string(), node));
    }
    Ok(out)
}

pub fn tokenize(args: &TokenizeArgs, jobs: usize) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("tokenize", None, config_of(args)?);
    let model = load_model(&args.checkpoint, &mut manifest)?;
    let graphs = load_graphs(&args.data, &mut manifest)?;
    let pool = thread_pool(jobs)?;
    let mut outputs = Outputs::default();
    if args.node_level {
        let centers: Vec<(usize, usize)> = match &args.nodes {
            Some(path) => {
                let by_id: BTreeMap<&str, usize> = graphs
                    .iter()
                    .enumerate()
                    .map(|(i, g)| (g.id(), i))
                    .collect();
                read_centers(path, &mut manifest)?
                    .into_iter()
                    .map(|(id, node)| {
                        let gi = *by_id
                            .get(id.as_str())
                            .ok_or_else(|| CliError::config(format!("unknown graph id {id:?}")))?;
                        if node >= graphs[gi].node_count() {
                            return Err(CliError::config(format!("graph {id} has no node {node}")));
                        }
                        Ok((gi, node))
                    })
                    .collect::<Result<_>>()?
            }
            None => graphs
                .iter()
                .enumerate()
                .flat_map(|(gi, g)| (0..g.node_count()).map(move |v| (gi, v)))
                .collect(),
        };
        let records = pool.install(|| {
            centers
                .par_iter()
                .map(|&(gi, v)| {
                    let g = &graphs[gi];
                    Ok(NodeTokenRecord {
                        graph_id: g.id().to_string(),
                        node: v,
                        token: model.assign_node_token(g, v, args.hops)?,
                    })
                })
                .collect::<std::result::Result<Vec<_>, TrainError>>()
        })?;
        let mut buf = Vec::new();
        write_node_token_table(&records, &mut buf)?;
        outputs.add(NODE_TOKEN_FILE, buf);
    } else {
        let assignments = pool.install(|| {
            graphs
                .par_iter()
                .map(|g| model.assign_token(g))
                .collect::<std::result::Result<Vec<_>, TrainError>>()
        })?;
        let (util, dead) =
            codebook_utilization(assignments.iter().map(|a| a.graph_token.0), model.k());
        log::info!(
            "{} graphs, codebook utilization {util:.3}, {dead} dead entries",
            assignments.len()
        );
        let mut buf = Vec::new();
        write_token_table(&assignments, &mut buf)?;
        outputs.add(TOKEN_FILE, buf);
    }
    outputs.finish(&args.out, manifest)
}

fn graph_embeddings(
    model: &TokenizerModel,
    graphs: &[Graph],
    pool: &rayon::ThreadPool,
) -> Result<Vec<GraphEmbedding>> {
    Ok(pool.install(|| {
        graphs
            .par_iter()
            .map(|g| {
                let enc = model.encode_graph(g)?;
                let n = g.node_count();
                Ok(GraphEmbedding {
                    id: g.id().to_string(),
                    token: StructuralToken(enc.indices[n]),
                    vector: enc.latent.row(n).to_vec(),
                })
            })
            .collect::<std::result::Result<Vec<_>, TrainError>>()
    })?)
}

pub fn gen_corpus(args: &CorpusArgs, jobs: usize) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("gen-corpus", Some(args.seed), config_of(args)?);
    let model = load_model(&args.checkpoint, &mut manifest)?;
    let graphs = load_graphs(&args.data, &mut manifest)?;
    let pool = thread_pool(jobs)?;
    let kinds: BTreeSet<QaKind> = args.kinds.iter().copied().collect();
    let mut records = Vec::new();
    if kinds.contains(&QaKind::Knn) {
        records.extend(gen_knn_records(&model.params.codebook, args.knn_k)?);
    }
    if kinds.contains(&QaKind::Simjudge) {
        let thresholds = SimilarityThresholds::new(args.tau_pos, args.tau_neg)?;
        let embeddings = graph_embeddings(&model, &graphs, &pool)?;
        let cfg = SimjudgeConfig::new(thresholds, args.pairs.unwrap_or(4 * model.k()), args.seed);
        records.extend(gen_simjudge_records(&embeddings, &cfg).records);
    }
    if kinds.contains(&QaKind::Descmatch) {
        let assignments = pool.install(|| {
            graphs
                .par_iter()
                .map(|g| model.assign_token(g))
                .collect::<std::result::Result<Vec<_>, TrainError>>()
        })?;
        records.extend(gen_descmatch_records(
            &graphs,
            &assignments,
            model.strategy,
        )?);
    }
    let mut buf = Vec::new();
    write_corpus(&records, &mut buf)?;
    let mut outputs = Outputs::default();
    outputs.add(CORPUS_FILE, buf);
    outputs.finish(&args.out, manifest)
}

fn registry(dir: Option<&Path>, manifest: &mut RunManifest) -> Result<TemplateRegistry> {
    match dir {
        Some(d) => {
            let index = d.join("tasks.json");
            manifest
                .add_input(&index)
                .map_err(|e| CliError::from(e).context(index.display()))?;
            Ok(TemplateRegistry::load_dir(d)?)
        }
        None => Ok(TemplateRegistry::builtin()),
    }
}

/// 80/10/10 split over `n` items.
fn random_split(n: usize, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 8 / 10;
    let n_valid = n / 10;
    let mut split = vec![Split::Test; n];
    for (pos, &i) in order.iter().enumerate() {
        split[i] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
    }
    split
}

/// Whole scaffold groups, largest first, fill train to 80% and valid to 10%.
fn scaffold_split(graphs: &[Graph]) -> Vec<Split> {
    let scaffolds: Vec<_> = graphs.iter().map(murcko_scaffold).collect();
    let groups = group_scaffolds(&scaffolds, ScaffoldGrouping::default());
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &gid) in groups.group_of.iter().enumerate() {
        members.entry(gid).or_default().push(i);
    }
    let mut ordered: Vec<Vec<usize>> = members.into_values().collect();
    ordered.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let n = graphs.len();
    let (train_cap, valid_cap) = (n * 8 / 10, n / 10);
    let (mut n_train, mut n_valid) = (0, 0);
    let mut split = vec![Split::Test; n];
    for group in ordered {
        let s = if n_train + group.len() <= train_cap {
            n_train += group.len();
            Split::Train
        } else if n_valid + group.len() <= valid_cap {
            n_valid += group.len();
            Split::Valid
        } else {
            Split::Test
        };
        for i in group {
            split[i] = s;
        }
    }
    split
}

fn assemble(records: Vec<PromptRecord>, args: &PromptArgs) -> Result<Vec<PromptRecord>> {
    let (train, rest): (Vec<_>, Vec<_>) =
        records.into_iter().partition(|r| r.split == Split::Train);
    let mut out = balance_split(&train, args.balance, args.seed)?;
    out.extend(rest);
    Ok(out)
}

pub fn gen_prompts(args: &PromptArgs) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("gen-prompts", Some(args.seed), config_of(args)?);
    let reg = registry(args.templates.as_deref(), &mut manifest)?;
    let tmpl = reg.get(&args.task)?.clone();
    let table = read_input(&args.tokens, &mut manifest)?;
    let table_sha = manifest.inputs[&args.tokens.display().to_string()].clone();
    let graphs = load_graphs(&args.data, &mut manifest)?;
    let records = if args.node_level {
        node_prompts(args, &tmpl, &table, &graphs, &mut manifest)?
    } else {
        graph_prompts(args, &tmpl, &table, &graphs)?
    };
    let records = assemble(records, args)?;
    write_prompt_files(
        &records,
        &args.out,
        &args.task,
        args.balance,
        args.seed,
        &table_sha,
    )?;
    let mut outputs = Outputs::default();
    for name in [
        "train.jsonl",
        "valid.jsonl",
        "test.jsonl",
        "prompts_manifest.json",
    ] {
        outputs.add(name, fs::read(args.out.join(name))?);
    }
    outputs.finish(&args.out, manifest)
}

fn graph_prompts(
    args: &PromptArgs,
    tmpl: &TaskTemplate,
    table: &[u8],
    graphs: &[Graph],
) -> Result<Vec<PromptRecord>> {
    let tokens: BTreeMap<String, StructuralToken> = read_token_table(table)?
        .into_iter()
        .map(|a| (a.graph_id, a.graph_token))
        .collect();
    let labeled: Vec<Graph> = graphs
        .iter()
        .filter(|g| g.label().is_some())
        .cloned()
        .collect();
    if labeled.len() < graphs.len() {
        log::warn!("{} unlabeled graphs skipped", graphs.len() - labeled.len());
    }
    let splits = match args.split {
        SplitMode::Random => random_split(labeled.len(), args.seed),
        SplitMode::Scaffold => scaffold_split(&labeled),
    };
    labeled
        .iter()
        .zip(splits)
        .map(|(g, split)| {
            let tok = *tokens.get(g.id()).ok_or_else(|| {
                CliError::config(format!("graph {} missing from the token table", g.id()))
            })?;
            Ok(render_prompt(tmpl, g, tok, split)?)
        })
        .collect()
}

fn node_prompts(
    args: &PromptArgs,
    tmpl: &TaskTemplate,
    table: &[u8],
    graphs: &[Graph],
    manifest: &mut RunManifest,
) -> Result<Vec<PromptRecord>> {
    if args.split == SplitMode::Scaffold {
        return Err(CliError::config(
            "scaffold splits apply to graph-level prompts only",
        ));
    }
    let path = args
        .node_labels
        .as_ref()
        .ok_or_else(|| CliError::config("--node-level prompts need --node-labels"))?;
    let labels = read_label_csv(&read_input(path, manifest)?[..])?;
    let by_id: BTreeMap<&str, &Graph> = graphs.iter().map(|g| (g.id(), g)).collect();
    let rows: Vec<NodeTokenRecord> = read_node_token_table(table)?
        .into_iter()
        .filter(|r| labels.contains_key(&format!("{}#{}", r.graph_id, r.node)))
        .collect();
    let splits = random_split(rows.len(), args.seed);
    rows.iter()
        .zip(splits)
        .map(|(r, split)| {
            let g = by_id
                .get(r.graph_id.as_str())
                .ok_or_else(|| CliError::config(format!("unknown graph id {:?}", r.graph_id)))?;
            let label = labels.get(&format!("{}#{}", r.graph_id, r.node)).copied();
            Ok(render_node_prompt(tmpl, g, r.node, label, r.token, split)?)
        })
        .collect()
}

fn read_jsonl<T: serde::de::DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<Vec<T>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::config(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn eval(args: &EvalArgs) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("eval", None, config_of(args)?);
    let reg = registry(args.templates.as_deref(), &mut manifest)?;
    let tmpl = reg.get(&args.task)?.clone();
    let prompts: Vec<PromptRecord> =
        read_jsonl(&read_input(&args.prompts, &mut manifest)?, &args.prompts)?;
    let responses: Vec<ResponseRecord> = read_jsonl(
        &read_input(&args.responses, &mut manifest)?,
        &args.responses,
    )?;

    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    for p in &prompts {
        let label = tmpl
            .answers
            .iter()
            .position(|a| *a == p.answer)
            .ok_or_else(|| {
                CliError::config(format!(
                    "{}: answer {:?} is not an option of {}",
                    p.id, p.answer, tmpl.id
                ))
            })?;
        if labels
            .insert(p.id.clone(), label)
            .is_some_and(|old| old != label)
        {
            return Err(CliError::config(format!(
                "conflicting answers for {}",
                p.id
            )));
        }
    }
    let mut by_id: BTreeMap<&str, &ResponseRecord> = BTreeMap::new();
    for r in &responses {
        if by_id.insert(r.id.as_str(), r).is_some() {
            return Err(CliError::config(format!("duplicate response for {}", r.id)));
        }
    }
    let mut aligned = Vec::with_capacity(labels.len());
    let mut missing = 0;
    for id in labels.keys() {
        aligned.push(match by_id.get(id.as_str()) {
            Some(r) => (*r).clone(),
            None => {
                missing += 1;
                ResponseRecord {
                    id: id.clone(),
                    text: String::new(),
                    score: None,
                }
            }
        });
    }
    if missing > 0 {
        log::warn!("{missing} prompts have no response and count as unknown");
    }
    let ys: Vec<usize> = labels.values().copied().collect();
    let (report, source) = if tmpl.is_binary() {
        let defaults = PhraseSets::default();
        let sets = PhraseSets {
            positive: tmpl.positive.clone().unwrap_or(defaults.positive),
            negative: tmpl.negative.clone().unwrap_or(defaults.negative),
        };
        let truth: Vec<bool> = ys.iter().map(|&y| y == 1).collect();
        evaluate_binary(&aligned, &truth, &sets)?
    } else {
        let preds: Vec<Option<usize>> = aligned
            .iter()
            .map(|r| parse_choice(&r.text, &tmpl.answers))
            .collect();
        (
            accuracy_and_f1(&preds, &ys, tmpl.answers.len())?,
            ScoreSource::Parsed,
        )
    };
    let mut buf = Vec::new();
    write_report_csv(&[(args.task.clone(), report, source)], &mut buf)?;
    let mut outputs = Outputs::default();
    outputs.add(REPORT_FILE, buf);
    outputs.finish(&args.out, manifest)
}

#[derive(serde::Serialize)]
struct StatsSummary {
    graphs: usize,
    k: usize,
    utilization: f64,
    dead_entries: usize,
    permutation: sogtok_core::metrics::ConsistencyReport,
    scaffold: Option<sogtok_core::metrics::ScaffoldReport>,
    zero_norm_entries: Vec<usize>,
}

pub fn stats(args: &StatsArgs, jobs: usize) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("stats", Some(args.seed), config_of(args)?);
    let model = load_model(&args.checkpoint, &mut manifest)?;
    let graphs = load_graphs(&args.data, &mut manifest)?;
    let pool = thread_pool(jobs)?;
    let mut outputs = Outputs::default();

    let first = args.corr_first.unwrap_or(DEFAULT_CORR_FIRST.min(model.k()));
    let corr = codebook_correlation(&model.params.codebook, first)?;
    let mut buf = Vec::new();
    write_correlation_csv(&corr, &mut buf)?;
    outputs.add("correlation.csv", buf);

    let mut buf = Vec::new();
    export_embeddings(&model, &graphs, &mut buf)?;
    outputs.add("embeddings.csv", buf);

    let embeddings = graph_embeddings(&model, &graphs, &pool)?;
    let (utilization, dead_entries) =
        codebook_utilization(embeddings.iter().map(|e| e.token.0), model.k());
    let permutation = permutation_consistency(&model, &graphs, args.trials, args.seed)?;

    let molecules: Vec<(usize, &Graph)> = graphs
        .iter()
        .enumerate()
        .filter(|(_, g)| g.graph_text().is_some())
        .collect();
    let scaffold = if molecules.is_empty() {
        None
    } else {
        let scaffolds: Vec<_> = molecules.iter().map(|(_, g)| murcko_scaffold(g)).collect();
        let groups = group_scaffolds(&scaffolds, ScaffoldGrouping::default());
        let items: Vec<ScaffoldItem> = molecules
            .iter()
            .zip(&groups.group_of)
            .map(|(&(i, g), &s)| ScaffoldItem {
                id: g.id().to_string(),
                scaffold: s,
                token: embeddings[i].token.0,
            })
            .collect();
        Some(scaffold_consistency(&items, args.shuffles, args.seed))
    };
    let summary = StatsSummary {
        graphs: graphs.len(),
        k: model.k(),
        utilization,
        dead_entries,
        permutation,
        scaffold,
        zero_norm_entries: corr.zero_norm,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    outputs.add("stats.json", text.into_bytes());
    outputs.finish(&args.out, manifest)
}

fn decode<T: serde::de::DeserializeOwned>(m: &RunManifest) -> Result<T> {
    serde_json::from_value(m.config.clone())
        .map_err(|e| CliError::config(format!("manifest config for {}: {e}", m.command)))
}

/// Re-runs a recorded command after checking its inputs are unchanged, then
/// compares every output checksum.
pub fn replay(args: &ReplayArgs, jobs: usize) -> Result<RunManifest> {
    let text = fs::read_to_string(&args.manifest)
        .map_err(|e| CliError::from(e).context(args.manifest.display()))?;
    let recorded = RunManifest::from_json(&text)?;
    for (path, sha) in &recorded.inputs {
        let now = sha256_file(Path::new(path)).map_err(|e| CliError::from(e).context(path))?;
        if &now != sha {
            return Err(CliError::config(format!(
                "input {path} changed since the recorded run"
            )));
        }
    }
    macro_rules! rerun {
        ($ty:ty, $f:expr) => {{
            let mut a: $ty = decode(&recorded)?;
            if let Some(out) = &args.out {
                a.out = out.clone();
            }
            $f(&a)?
        }};
    }
    let fresh = match recorded.command.as_str() {
        "train" => rerun!(TrainArgs, train),
        "tokenize" => rerun!(TokenizeArgs, |a| tokenize(a, jobs)),
        "gen-corpus" => rerun!(CorpusArgs, |a| gen_corpus(a, jobs)),
        "gen-prompts" => rerun!(PromptArgs, gen_prompts),
        "eval" => rerun!(EvalArgs, eval),
        "stats" => rerun!(StatsArgs, |a| stats(a, jobs)),
        other => return Err(CliError::config(format!("cannot replay command {other:?}"))),
    };
    for (name, sha) in &recorded.outputs {
        match fresh.outputs.get(name) {
            Some(s) if s == sha => {}
            _ => {
                return Err(CliError::config(format!(
                    "replay produced a different {name}"
                )))
            }
        }
    }
    if fresh.outputs.len() != recorded.outputs.len() {
        return Err(CliError::config(
            "replay produced a different set of outputs",
        ));
    }
    println!(
        "replayed {}: {} outputs identical",
        recorded.command,
        fresh.outputs.len()
    );
    Ok(fresh)
}

pub fn manifest_path(dir: &Path) -> std::path::PathBuf {
    dir.join(MANIFEST_FILE)
}
