use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sogtok_core::ingest::write_graph_file;
use sogtok_core::synthetic::synthetic_families;
use sogtok_core::Graph;

fn sogtok(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sogtok"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    graphs: Vec<Graph>,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let graphs: Vec<Graph> = synthetic_families(4, 2)
            .into_iter()
            .map(|(g, f)| {
                let text = format!("C{}", g.node_count());
                g.with_label(Some(i64::from(f == 0)))
                    .with_graph_text(Some(text))
            })
            .collect();
        let mut buf = Vec::new();
        write_graph_file(&mut buf, &graphs).unwrap();
        fs::write(root.join("data.jsonl"), buf).unwrap();
        Self {
            _dir: dir,
            root,
            graphs,
        }
    }

    fn path(&self, rel: &str) -> String {
        self.root.join(rel).display().to_string()
    }

    fn train(&self) -> String {
        let out = sogtok(&[
            "train",
            "--data",
            &self.path("data.jsonl"),
            "--seed",
            "3",
            "--k",
            "8",
            "--warmup-epochs",
            "2",
            "--epochs",
            "3",
            "--feature-dim",
            "16",
            "--latent-dim",
            "8",
            "--out",
            &self.path("train"),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        self.path("train/model.ckpt")
    }
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn exit_codes() {
    let fx = Fixture::new();
    let data = fx.path("data.jsonl");
    let out = fx.path("o");
    assert_eq!(
        code(&sogtok(&["train", "--data", &data, "--out", &out])),
        2,
        "missing seed"
    );
    assert_eq!(code(&sogtok(&["train", "--bogus"])), 2);
    assert_eq!(
        code(&sogtok(&[
            "train", "--data", &data, "--seed", "1", "--k", "1", "--out", &out
        ])),
        2
    );
    let missing = fx.path("missing.jsonl");
    assert_eq!(
        code(&sogtok(&[
            "train", "--data", &missing, "--seed", "1", "--out", &out
        ])),
        1
    );
    let diverge = sogtok(&[
        "train",
        "--data",
        &data,
        "--seed",
        "1",
        "--k",
        "4",
        "--warmup-epochs",
        "3",
        "--epochs",
        "0",
        "--lr-warmup",
        "1e300",
        "--out",
        &out,
    ]);
    assert_eq!(code(&diverge), 3);
    assert!(String::from_utf8_lossy(&diverge.stderr).contains("non-finite"));
}

#[test]
fn train_writes_log_checkpoints_and_manifest() {
    let fx = Fixture::new();
    fx.train();
    let log = lines(&fx.root.join("train/train_log.tsv"));
    assert_eq!(log.len(), 1 + 5);
    assert!(log[0].starts_with("epoch\tphase\trecon"));
    assert!(fx.root.join("train/manifest.json").exists());
}

#[test]
fn tokenize_row_counts() {
    let fx = Fixture::new();
    let ckpt = fx.train();
    let data = fx.path("data.jsonl");
    let out = sogtok(&[
        "tokenize",
        "--checkpoint",
        &ckpt,
        "--data",
        &data,
        "--out",
        &fx.path("tok"),
    ]);
    assert_eq!(code(&out), 0);
    let rows = lines(&fx.root.join("tok/tokens.tsv"));
    assert_eq!(rows.len(), 1 + fx.graphs.len());

    let out = sogtok(&[
        "tokenize",
        "--checkpoint",
        &ckpt,
        "--data",
        &data,
        "--node-level",
        "--hops",
        "0",
        "--jobs",
        "2",
        "--out",
        &fx.path("nodes"),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&fx.root.join("nodes/node_tokens.tsv"));
    let total: usize = fx.graphs.iter().map(Graph::node_count).sum();
    assert_eq!(rows.len(), 1 + total);
    assert_eq!(rows[0], "id\tnode\tnode_token");
    // with no hops every ego graph is a single node, so all centers share one token
    let tokens: std::collections::BTreeSet<&str> = rows[1..]
        .iter()
        .map(|r| r.rsplit('\t').next().unwrap())
        .collect();
    assert_eq!(tokens.len(), 1);
}

#[test]
fn node_centers_must_exist() {
    let fx = Fixture::new();
    let ckpt = fx.train();
    let id = fx.graphs[0].id();
    fs::write(fx.root.join("centers.csv"), format!("id,node\n{id},999\n")).unwrap();
    let out = sogtok(&[
        "tokenize",
        "--checkpoint",
        &ckpt,
        "--data",
        &fx.path("data.jsonl"),
        "--node-level",
        "--nodes",
        &fx.path("centers.csv"),
        "--out",
        &fx.path("nodes"),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn corpus_and_prompts_are_deterministic_across_jobs() {
    let fx = Fixture::new();
    let ckpt = fx.train();
    let data = fx.path("data.jsonl");
    for (dir, jobs) in [("c1", "1"), ("c4", "4")] {
        let out = sogtok(&[
            "gen-corpus",
            "--checkpoint",
            &ckpt,
            "--data",
            &data,
            "--seed",
            "5",
            "--jobs",
            jobs,
            "--out",
            &fx.path(dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(fx.root.join("c1/corpus.jsonl")).unwrap();
    assert_eq!(a, fs::read(fx.root.join("c4/corpus.jsonl")).unwrap());
    let records = String::from_utf8(a).unwrap();
    let descmatch = records
        .lines()
        .filter(|l| l.contains("\"descmatch\""))
        .count();
    assert_eq!(descmatch, fx.graphs.len());

    sogtok(&[
        "tokenize",
        "--checkpoint",
        &ckpt,
        "--data",
        &data,
        "--out",
        &fx.path("tok"),
    ]);
    let tokens = fx.path("tok/tokens.tsv");
    for dir in ["p1", "p2"] {
        let out = sogtok(&[
            "gen-prompts",
            "--tokens",
            &tokens,
            "--data",
            &data,
            "--task",
            "BBBP_p_np",
            "--seed",
            "4",
            "--balance",
            "1:1",
            "--out",
            &fx.path(dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["train.jsonl", "valid.jsonl", "test.jsonl"] {
        assert_eq!(
            fs::read(fx.root.join("p1").join(file)).unwrap(),
            fs::read(fx.root.join("p2").join(file)).unwrap()
        );
    }
    let rows: usize = ["valid.jsonl", "test.jsonl"]
        .iter()
        .map(|f| lines(&fx.root.join("p1").join(f)).len())
        .sum();
    let train = lines(&fx.root.join("p1/train.jsonl"));
    let positives = train
        .iter()
        .filter(|l| l.contains("\"answer\":\"True\""))
        .count();
    assert_eq!(positives * 2, train.len());
    assert!(rows < fx.graphs.len());
}

#[test]
fn replay_detects_changed_inputs() {
    let fx = Fixture::new();
    let ckpt = fx.train();
    let data = fx.path("data.jsonl");
    sogtok(&[
        "tokenize",
        "--checkpoint",
        &ckpt,
        "--data",
        &data,
        "--out",
        &fx.path("tok"),
    ]);
    let manifest = fx.path("tok/manifest.json");
    assert_eq!(
        code(&sogtok(&[
            "replay",
            "--manifest",
            &manifest,
            "--out",
            &fx.path("again")
        ])),
        0
    );
    fs::write(&data, "").unwrap();
    assert_ne!(
        code(&sogtok(&[
            "replay",
            "--manifest",
            &manifest,
            "--out",
            &fx.path("again2")
        ])),
        0
    );
}
