//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sogtok_core::attributes::ImportanceStrategy;
use sogtok_core::corpus::{
    gen_descmatch_records, gen_knn_records, gen_simjudge_records, parse_description,
    GraphEmbedding, QaKind, SimilarityThresholds, SimjudgeConfig,
};
use sogtok_core::ingest::{parse_smiles, smiles_to_graph, write_graph_file, SmilesError};
use sogtok_core::metrics::{accuracy_and_f1, auc_roc, parse_answer, AnswerValue, PhraseSets};
use sogtok_core::model::{
    backward, forward, quantize, BatchState, Codebook, DecoderParams, EncoderParams, GraphInput,
    LossOptions, Phase, VqParams,
};
use sogtok_core::prompt::{render_prompt, Split, TemplateRegistry};
use sogtok_core::synthetic::{scaffold_molecules, strict_ranking_graphs, synthetic_families};
use sogtok_core::{build_adjacency, permute, train, Graph, StructuralToken, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Mat = Vec<Vec<f64>>;

fn to_mat(a: &Array2<f64>) -> Mat {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for t in 0..k {
            for j in 0..m {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn brute_nearest(h: &[f64], cb: &Mat) -> usize {
    let mut best = 0;
    for k in 1..cb.len() {
        if sq_dist(h, &cb[k]) < sq_dist(h, &cb[best]) {
            best = k;
        }
    }
    best
}

/// Independent forward pass over plain matrices.
struct Oracle {
    a_hat: Mat,
    target: Mat,
    x: Mat,
}

impl Oracle {
    fn new(n: usize, edges: &[(usize, usize)], x: Mat) -> Self {
        let mut target = vec![vec![0.0; n]; n];
        for &(a, b) in edges {
            target[a][b] = 1.0;
            target[b][a] = 1.0;
        }
        let mut tilde = target.clone();
        for (i, row) in tilde.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let deg: Vec<f64> = tilde.iter().map(|r| r.iter().sum()).collect();
        let a_hat = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| tilde[i][j] / (deg[i] * deg[j]).sqrt())
                    .collect()
            })
            .collect();
        Self { a_hat, target, x }
    }

    fn latent(&self, w1: &Mat, w2: &Mat) -> Mat {
        let hidden: Mat = matmul(&matmul(&self.a_hat, &self.x), w1)
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        matmul(&matmul(&self.a_hat, &hidden), w2)
    }

    /// Loss whose gradient at the base point equals the stop-gradient rule:
    /// `Z = H - sg[H] + sg[Q]`, update term on the live codebook, commitment
    /// term on the live encoder.
    fn surrogate(&self, p: &[Mat; 4], base: &[Mat; 4], beta: f64) -> f64 {
        let h = self.latent(&p[0], &p[1]);
        let h0 = self.latent(&base[0], &base[1]);
        let idx: Vec<usize> = h0.iter().map(|r| brute_nearest(r, &base[3])).collect();
        let z: Mat = (0..h.len())
            .map(|i| {
                (0..h[i].len())
                    .map(|j| h[i][j] - h0[i][j] + base[3][idx[i]][j])
                    .collect()
            })
            .collect();
        let xr = matmul(&z, &p[2]);
        let mut recon = 0.0;
        for i in 0..xr.len() {
            for j in 0..xr.len() {
                let r: f64 = xr[i].iter().zip(&xr[j]).map(|(a, b)| a * b).sum();
                recon += (self.target[i][j] - r).powi(2);
            }
        }
        let update: f64 = (0..h.len()).map(|i| sq_dist(&h0[i], &p[3][idx[i]])).sum();
        let commit: f64 = (0..h.len()).map(|i| sq_dist(&h[i], &base[3][idx[i]])).sum();
        recon + update + beta * commit
    }
}

fn criterion_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = 6;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.4) {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::from_edges("fd", n, edges.clone()).unwrap();
        let x = Array2::from_shape_fn((n, 8), |_| rng.random_range(-1.0..1.0));
        let params = VqParams {
            encoder: EncoderParams::glorot(8, 8, 4, &mut rng),
            decoder: DecoderParams::glorot(4, 3, &mut rng),
            codebook: Codebook::gaussian(4, 4, 0.5, &mut rng),
        };
        let opts = LossOptions::default();
        let input = GraphInput::new(&build_adjacency(&g), x.clone()).unwrap();
        let batch = BatchState {
            states: vec![forward(&params, &input, Phase::Joint, &opts).unwrap()],
        };
        let grads = backward(&batch, &params, &opts).unwrap();
        let analytic = [&grads.w1, &grads.w2, &grads.wd, &grads.codebook];

        let oracle = Oracle::new(n, &edges, to_mat(&x));
        let base = [
            to_mat(&params.encoder.w1),
            to_mat(&params.encoder.w2),
            to_mat(&params.decoder.wd),
            to_mat(&params.codebook.entries),
        ];
        for which in 0..4 {
            for r in 0..base[which].len() {
                for c in 0..base[which][0].len() {
                    let mut plus = base.clone();
                    plus[which][r][c] += eps;
                    let mut minus = base.clone();
                    minus[which][r][c] -= eps;
                    let numeric = (oracle.surrogate(&plus, &base, opts.beta)
                        - oracle.surrogate(&minus, &base, opts.beta))
                        / (2.0 * eps);
                    let a = analytic[which][[r, c]];
                    let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                    worst = worst.max(err);
                }
            }
        }
    }
    outcome(
        worst < 1e-4,
        format!("max relative error {worst:.3e} over 20 instances (limit 1e-4)"),
    )
}

fn criterion_quantize() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sizes = [2usize, 16, 64, 256, 512];
    let mut agree = 0;
    let mut total = 0;
    for q in 0..1000 {
        let k = sizes[q % sizes.len()];
        let d = 1 + q % 8;
        // coarse integer grids make exact ties common
        let cb = Array2::from_shape_fn((k, d), |_| rng.random_range(-2..=2) as f64);
        let h = Array2::from_shape_fn((1, d), |_| rng.random_range(-2..=2) as f64);
        let sel = quantize(&h, &Codebook::new(cb.clone()).unwrap()).unwrap();
        let expected = brute_nearest(&h.row(0).to_vec(), &to_mat(&cb));
        total += 1;
        if sel.indices[0] == expected {
            agree += 1;
        }
    }
    outcome(
        agree == total,
        format!("{agree}/{total} queries agree with exhaustive search, K up to 512"),
    )
}

fn dominant(tokens: &[usize]) -> (usize, usize) {
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &t in tokens {
        *freq.entry(t).or_default() += 1;
    }
    freq.into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .unwrap()
}

fn criterion_families() -> Outcome {
    let data = synthetic_families(60, 11);
    let graphs: Vec<Graph> = data.iter().map(|(g, _)| g.clone()).collect();
    let cfg = TrainConfig {
        k: 16,
        warmup_epochs: 10,
        joint_epochs: 50,
        lr_warmup: 3e-3,
        lr_gcn: 3e-3,
        lr_codebook: 0.05,
        seed: 3,
        ..TrainConfig::default()
    };
    let out = match train(&graphs, &cfg) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("training failed: {e}")),
    };
    let first = out.log[0].recon;
    let last = out.log.last().unwrap().recon;
    let mut purities = Vec::new();
    let mut dominants = BTreeSet::new();
    for fam in 0..3 {
        let tokens: Vec<usize> = data
            .iter()
            .filter(|(_, f)| *f == fam)
            .map(|(g, _)| out.model.assign_token(g).unwrap().graph_token.0)
            .collect();
        let (tok, count) = dominant(&tokens);
        dominants.insert(tok);
        purities.push(count as f64 / tokens.len() as f64);
    }
    let min_purity = purities.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = last < 0.5 * first && min_purity >= 0.8 && dominants.len() == 3;
    outcome(
        pass,
        format!(
            "recon {first:.4e} -> {last:.4e} (ratio {:.3}); purity cycle/star/clique {:.2}/{:.2}/{:.2}; {} distinct dominant tokens",
            last / first,
            purities[0],
            purities[1],
            purities[2],
            dominants.len()
        ),
    )
}

fn criterion_permutation() -> Outcome {
    let graphs = strict_ranking_graphs(50, ImportanceStrategy::Degree, 17);
    let cfg = TrainConfig {
        k: 16,
        warmup_epochs: 3,
        joint_epochs: 5,
        seed: 1,
        ..TrainConfig::default()
    };
    let model = train(&graphs, &cfg).unwrap().model;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut agree = 0;
    let mut total = 0;
    for g in &graphs {
        let base = model.assign_token(g).unwrap().graph_token;
        for _ in 0..10 {
            let mut perm: Vec<usize> = (0..g.node_count()).collect();
            perm.shuffle(&mut rng);
            total += 1;
            if model
                .assign_token(&permute(g, &perm).unwrap())
                .unwrap()
                .graph_token
                == base
            {
                agree += 1;
            }
        }
    }
    outcome(
        agree == total,
        format!("{agree}/{total} relabelings keep the graph token"),
    )
}

fn mean_purity(groups: &BTreeMap<usize, Vec<usize>>, tokens: &[usize]) -> f64 {
    let sum: f64 = groups
        .values()
        .map(|m| {
            let ts: Vec<usize> = m.iter().map(|&i| tokens[i]).collect();
            dominant(&ts).1 as f64 / ts.len() as f64
        })
        .sum();
    sum / groups.len() as f64
}

fn criterion_scaffold() -> Outcome {
    let mols = scaffold_molecules();
    let graphs: Vec<Graph> = mols
        .iter()
        .map(|(id, smi, _)| smiles_to_graph(smi, id.clone()).unwrap())
        .collect();
    let cfg = TrainConfig {
        k: 32,
        warmup_epochs: 10,
        joint_epochs: 50,
        lr_warmup: 1e-3,
        lr_gcn: 1e-3,
        lr_codebook: 1e-2,
        seed: 1,
        ..TrainConfig::default()
    };
    let model = train(&graphs, &cfg).unwrap().model;
    let mut tokens: Vec<usize> = graphs
        .iter()
        .map(|g| model.assign_token(g).unwrap().graph_token.0)
        .collect();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, (_, _, s)) in mols.iter().enumerate() {
        groups.entry(*s).or_default().push(i);
    }
    let purity = mean_purity(&groups, &tokens);
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut baseline = 0.0;
    for _ in 0..100 {
        tokens.shuffle(&mut rng);
        baseline += mean_purity(&groups, &tokens);
    }
    baseline /= 100.0;
    outcome(
        purity >= 2.0 * baseline,
        format!(
            "purity {purity:.3} vs shuffled baseline {baseline:.3} (ratio {:.2}, need 2.00)",
            purity / baseline
        ),
    )
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn criterion_corpus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    let mut bad = Vec::new();

    let k = 100;
    let cb_rows: Mat = (0..k)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let cb = Codebook::new(Array2::from_shape_fn((k, 6), |(i, j)| cb_rows[i][j])).unwrap();
    for rec in gen_knn_records(&cb, 5).unwrap() {
        let target = rec.provenance[0].parse::<StructuralToken>().unwrap().0;
        let mut order: Vec<usize> = (0..k).filter(|&j| j != target).collect();
        order.sort_by(|&a, &b| {
            cosine(&cb_rows[target], &cb_rows[b])
                .partial_cmp(&cosine(&cb_rows[target], &cb_rows[a]))
                .unwrap()
                .then(a.cmp(&b))
        });
        let expected: Vec<String> = order[..5].iter().map(|&j| format!("<SOG_{j}>")).collect();
        checked += 1;
        if rec.answer != expected.join(", ") || !rec.question.contains(&format!("<SOG_{target}>")) {
            bad.push(format!("knn {target}"));
        }
    }

    let embeddings: Vec<GraphEmbedding> = (0..60)
        .map(|i| GraphEmbedding {
            id: format!("e{i:02}"),
            token: StructuralToken(i % 8),
            vector: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    let thresholds = SimilarityThresholds::new(0.8, 0.2).unwrap();
    let out = gen_simjudge_records(&embeddings, &SimjudgeConfig::new(thresholds, 200, 4));
    let by_id: BTreeMap<&str, &GraphEmbedding> =
        embeddings.iter().map(|e| (e.id.as_str(), e)).collect();
    for rec in &out.records {
        let a = by_id[rec.provenance[0].as_str()];
        let b = by_id[rec.provenance[1].as_str()];
        let c = cosine(&a.vector, &b.vector);
        let expected = if c > 0.8 {
            "similar"
        } else if c < 0.2 {
            "dissimilar"
        } else {
            "skip"
        };
        checked += 1;
        if rec.answer != expected
            || !rec.question.contains(&a.token.to_string())
            || !rec.question.contains(&b.token.to_string())
        {
            bad.push(format!("simjudge {} {}", a.id, b.id));
        }
    }

    let graphs: Vec<Graph> = synthetic_families(67, 8)
        .into_iter()
        .map(|(g, _)| g)
        .collect();
    let assignments: Vec<_> = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| sogtok_core::TokenAssignment {
            graph_id: g.id().to_string(),
            graph_token: StructuralToken(i % 16),
            node_tokens: Vec::new(),
        })
        .collect();
    let records = gen_descmatch_records(&graphs, &assignments, ImportanceStrategy::Degree).unwrap();
    for (rec, g) in records.iter().zip(&graphs) {
        checked += 1;
        let pairs = parse_description(&rec.question).unwrap();
        let attrs =
            sogtok_core::attributes::assign_attributes(g, ImportanceStrategy::Degree).unwrap();
        let order = attrs.rank_order();
        let mapped: BTreeSet<(usize, usize)> = pairs
            .iter()
            .map(|&(a, b)| (order[a].min(order[b]), order[a].max(order[b])))
            .collect();
        let original: BTreeSet<(usize, usize)> = g.edges().iter().copied().collect();
        if rec.kind != QaKind::Descmatch || mapped != original || pairs.len() != original.len() {
            bad.push(format!("descmatch {}", g.id()));
        }
    }
    let pass = bad.is_empty() && checked >= 500 && out.shortfall.is_none();
    outcome(
        pass,
        format!(
            "{} of {checked} records consistent (knn {k}, simjudge {}, descmatch {}){}",
            checked - bad.len(),
            out.records.len(),
            records.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; first failure {}", bad[0])
            }
        ),
    )
}

fn criterion_golden() -> Outcome {
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/golden"));
    let registry = TemplateRegistry::builtin();
    let g = smiles_to_graph("CC(=O)Oc1ccccc1C(=O)O", "aspirin")
        .unwrap()
        .with_label(Some(1));
    let mut matched = 0;
    let mut total = 0;
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for path in entries {
        total += 1;
        let task = path.file_stem().unwrap().to_str().unwrap();
        let expected = fs::read(&path).unwrap();
        let Ok(tmpl) = registry.get(task) else {
            continue;
        };
        let Ok(rec) = render_prompt(tmpl, &g, StructuralToken(42), Split::Test) else {
            continue;
        };
        if rec.prompt.as_bytes() == expected.as_slice() {
            matched += 1;
        }
    }
    outcome(
        matched == 17 && total == 17,
        format!("{matched}/{total} golden prompts byte-identical"),
    )
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                den += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn criterion_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..20)) / 20.0)
            .collect();
        let a = auc_roc(&scores, &labels).unwrap();
        let b = pairwise_auc(&scores, &labels);
        worst = worst.max((a - b).abs() / b.abs().max(1e-300));
    }
    let example = auc_roc(&[0.9, 0.8, 0.3, 0.2], &[true, false, true, false]).unwrap();

    let sets = PhraseSets::default();
    let suite = [
        ("No, it is not active.", AnswerValue::Negative),
        ("It is not approved.", AnswerValue::Negative),
        (
            "False. Though one might say true at first glance.",
            AnswerValue::Negative,
        ),
        ("Yes, the molecule is active.", AnswerValue::Positive),
        ("The result is true", AnswerValue::Positive),
        ("Inactive", AnswerValue::Negative),
        ("I cannot tell.", AnswerValue::Unknown),
        ("yes and no", AnswerValue::Negative),
    ];
    let parse_ok = suite
        .iter()
        .filter(|(t, v)| parse_answer(t, &sets).value == *v)
        .count();

    let preds = [Some(1), Some(1), Some(0), Some(0)];
    let labels = [1, 0, 1, 0];
    let report = accuracy_and_f1(&preds, &labels, 2).unwrap();
    let f1_ok = report.micro_f1 == 0.5 && report.accuracy == 0.5;

    let pass = worst <= 1e-12 && example == 0.75 && parse_ok == suite.len() && f1_ok;
    outcome(
        pass,
        format!(
            "AUC worst rel diff {worst:.1e}; worked example {example}; phrase suite {parse_ok}/{}; F1 {} accuracy {}",
            suite.len(),
            report.micro_f1,
            report.accuracy
        ),
    )
}

/// (SMILES, atoms, bonds, rings), counted by hand.
const SMILES_CORPUS: [(&str, usize, usize, usize); 20] = [
    ("CCO", 3, 2, 0),
    ("C1CC1", 3, 3, 1),
    ("c1ccccc1", 6, 6, 1),
    ("CC(=O)O", 4, 3, 0),
    ("CC(=O)Oc1ccccc1C(=O)O", 13, 13, 1),
    ("Cc1ccccc1", 7, 7, 1),
    ("c1ccc2ccccc2c1", 10, 11, 2),
    ("C1CCCCC1", 6, 6, 1),
    ("C#N", 2, 1, 0),
    ("BrCCBr", 4, 3, 0),
    ("CC(C)(C)C", 5, 4, 0),
    ("c1ccncc1", 6, 6, 1),
    ("c1cc[nH]c1", 5, 5, 1),
    ("ClC(Cl)Cl", 4, 3, 0),
    ("F/C=C/F", 4, 3, 0),
    ("C1CC2CCC1C2", 7, 8, 2),
    ("OC[C@H](O)CO", 6, 5, 0),
    ("CN1C=NC2=C1C(=O)N(C(=O)N2C)C", 14, 15, 2),
    ("C%10CCCC%10", 5, 5, 1),
    ("[Na+].[Cl-]", 2, 0, 0),
];

fn connected(g: &Graph) -> bool {
    g.bfs_distances(0).iter().all(Option::is_some)
}

fn criterion_parser() -> Outcome {
    let mut bad = Vec::new();
    for (smi, atoms, bonds, rings) in SMILES_CORPUS {
        match parse_smiles(smi) {
            Ok(m) => {
                let g = smiles_to_graph(smi, "m").unwrap();
                let single_component = !smi.contains('.');
                if m.atoms.len() != atoms
                    || m.bonds.len() != bonds
                    || m.ring_count() != rings
                    || g.edge_count() != bonds
                    || (single_component && !connected(&g))
                {
                    bad.push(smi.to_string());
                }
            }
            Err(e) => bad.push(format!("{smi}: {e}")),
        }
    }
    let errors: [(&str, SmilesError); 4] = [
        ("C1CC", SmilesError::UnclosedRing { digit: 1 }),
        ("CC(C", SmilesError::UnbalancedBranch { position: 2 }),
        ("CC)C", SmilesError::UnbalancedBranch { position: 2 }),
        (
            "CC*C",
            SmilesError::UnsupportedToken {
                position: 2,
                token: "*".into(),
            },
        ),
    ];
    for (smi, expected) in &errors {
        match parse_smiles(smi) {
            Err(e) if e == *expected => {}
            other => bad.push(format!("{smi}: {other:?}")),
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} molecules and {} error cases{}",
            SMILES_CORPUS.len(),
            errors.len(),
            if bad.is_empty() {
                " as expected".to_string()
            } else {
                format!("; mismatches {bad:?}")
            }
        ),
    )
}

fn sogtok(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sogtok"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{:?}: {}",
            args,
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                if rel != "manifest.json" {
                    out.insert(rel, fs::read(&p).unwrap());
                }
            }
        }
    }
    out
}

fn criterion_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let p = |s: &str| root.join(s).display().to_string();
    let mols: Vec<Graph> = scaffold_molecules()
        .into_iter()
        .step_by(4)
        .enumerate()
        .map(|(i, (id, smi, _))| {
            smiles_to_graph(&smi, id)
                .unwrap()
                .with_graph_text(Some(smi))
                .with_label(Some(i64::from(i % 3 == 0)))
        })
        .collect();
    let mut buf = Vec::new();
    write_graph_file(&mut buf, &mols).unwrap();
    fs::write(root.join("data.jsonl"), buf).unwrap();
    let data = p("data.jsonl");

    let mut steps: Vec<(&str, Vec<String>)> = Vec::new();
    let run = |name: &str, args: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        v.push("--out".into());
        v.push(p(name));
        v
    };
    steps.push((
        "train",
        run(
            "train",
            &[
                "train",
                "--data",
                &data,
                "--seed",
                "7",
                "--k",
                "16",
                "--warmup-epochs",
                "3",
                "--epochs",
                "6",
                "--feature-dim",
                "32",
                "--latent-dim",
                "16",
                "--save-every",
                "3",
            ],
        ),
    ));
    let ckpt = p("train/model.ckpt");
    steps.push((
        "tokenize",
        run(
            "tokenize",
            &["tokenize", "--checkpoint", &ckpt, "--data", &data],
        ),
    ));
    steps.push((
        "node",
        run(
            "node",
            &[
                "tokenize",
                "--checkpoint",
                &ckpt,
                "--data",
                &data,
                "--node-level",
                "--hops",
                "2",
                "--jobs",
                "4",
            ],
        ),
    ));
    steps.push((
        "corpus",
        run(
            "corpus",
            &[
                "gen-corpus",
                "--checkpoint",
                &ckpt,
                "--data",
                &data,
                "--seed",
                "3",
                "--jobs",
                "3",
            ],
        ),
    ));
    let tokens = p("tokenize/tokens.tsv");
    steps.push((
        "prompts",
        run(
            "prompts",
            &[
                "gen-prompts",
                "--tokens",
                &tokens,
                "--data",
                &data,
                "--task",
                "BBBP_p_np",
                "--balance",
                "1:1",
                "--seed",
                "5",
                "--split",
                "scaffold",
            ],
        ),
    ));
    steps.push((
        "stats",
        run(
            "stats",
            &[
                "stats",
                "--checkpoint",
                &ckpt,
                "--data",
                &data,
                "--corr-first",
                "16",
                "--seed",
                "2",
            ],
        ),
    ));

    let mut problems = Vec::new();
    for (name, args) in &steps {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        if let Err(e) = sogtok(&refs) {
            return outcome(false, e);
        }
        let first = dir_contents(&root.join(name));
        let replay_dir = p(&format!("{name}_replay"));
        let manifest = p(&format!("{name}/manifest.json"));
        if let Err(e) = sogtok(&["replay", "--manifest", &manifest, "--out", &replay_dir]) {
            problems.push(e);
            continue;
        }
        if dir_contents(Path::new(&replay_dir)) != first {
            problems.push(format!("{name} replay differs"));
        }
    }

    let responses: String = fs::read_to_string(root.join("prompts/test.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            format!("{}\n", serde_json::json!({"id": v["id"], "text": format!("Answer: {}", v["answer"].as_str().unwrap())}))
        })
        .collect();
    fs::write(root.join("responses.jsonl"), responses).unwrap();
    let eval_args = [
        "eval",
        "--responses",
        &p("responses.jsonl"),
        "--prompts",
        &p("prompts/test.jsonl"),
        "--task",
        "BBBP_p_np",
    ];
    for out in ["eval", "eval_again"] {
        let mut a = eval_args.to_vec();
        let o = p(out);
        a.extend(["--out", &o]);
        if let Err(e) = sogtok(&a) {
            return outcome(false, e);
        }
    }
    if dir_contents(&root.join("eval")) != dir_contents(&root.join("eval_again")) {
        problems.push("eval rerun differs".into());
    }
    outcome(
        problems.is_empty(),
        format!(
            "{} subcommands replayed byte-identically{}",
            steps.len() + 1,
            if problems.is_empty() {
                String::new()
            } else {
                format!("; {problems:?}")
            }
        ),
    )
}

fn criterion_sweeps() -> Outcome {
    let graphs: Vec<Graph> = synthetic_families(60, 11)
        .into_iter()
        .map(|(g, _)| g)
        .collect();
    let mut rows = Vec::new();
    let base = TrainConfig {
        warmup_epochs: 2,
        joint_epochs: 3,
        seed: 9,
        latent_dim: 16,
        feature_dim: 32,
        ..TrainConfig::default()
    };
    let mut ok = true;
    let mut configs: Vec<(String, TrainConfig)> = [64, 128, 256, 512]
        .into_iter()
        .map(|k| (format!("K={k}"), TrainConfig { k, ..base.clone() }))
        .collect();
    for s in [
        ImportanceStrategy::Degree,
        ImportanceStrategy::PageRank,
        ImportanceStrategy::Betweenness,
        ImportanceStrategy::Random { seed: 9 },
    ] {
        configs.push((
            format!("anchor={}", s.name()),
            TrainConfig {
                k: 64,
                strategy: s,
                ..base.clone()
            },
        ));
    }
    for (name, cfg) in configs {
        match train(&graphs, &cfg) {
            Ok(out) => {
                let last = out.log.last().unwrap();
                let finite = last.total.is_finite();
                ok &= finite;
                rows.push(format!(
                    "{name}: recon {:.3e} util {:.3}",
                    last.recon, last.utilization
                ));
            }
            Err(e) => {
                ok = false;
                rows.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(ok, rows.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 11] = [
        (
            "1 gradient correctness",
            criterion_gradients,
            Duration::from_secs(5),
        ),
        (
            "2 quantization oracle",
            criterion_quantize,
            Duration::from_secs(5),
        ),
        (
            "3 synthetic family separation",
            criterion_families,
            Duration::from_secs(120),
        ),
        (
            "4 permutation consistency",
            criterion_permutation,
            Duration::from_secs(30),
        ),
        (
            "5 scaffold consistency",
            criterion_scaffold,
            Duration::from_secs(60),
        ),
        ("6 corpus fidelity", criterion_corpus, Duration::MAX),
        ("7 prompt golden files", criterion_golden, Duration::MAX),
        ("8 metric oracles", criterion_metrics, Duration::MAX),
        ("9 parser suite", criterion_parser, Duration::MAX),
        ("10 determinism", criterion_determinism, Duration::MAX),
        ("11 config sweeps", criterion_sweeps, Duration::MAX),
    ];
    let mut failures = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked"));
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = result.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {name}: {} ({:.2}s{})",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            if in_time {
                String::new()
            } else {
                format!(", over the {}s budget", budget.as_secs())
            }
        );
    }
    println!("acceptance: {} passed, {failures} failed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
