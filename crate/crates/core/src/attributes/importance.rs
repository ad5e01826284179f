use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_MAX_ITERS: usize = 100;
pub const PAGERANK_TOL: f64 = 1e-9;

/// Node importance measure used to pick the anchor and rank nodes within a hop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ImportanceStrategy {
    #[default]
    Degree,
    PageRank,
    Betweenness,
    Random {
        seed: u64,
    },
}

impl ImportanceStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Degree => "degree",
            Self::PageRank => "pagerank",
            Self::Betweenness => "betweenness",
            Self::Random { .. } => "random",
        }
    }

    pub(crate) fn code(&self) -> (u8, u64) {
        match *self {
            Self::Degree => (0, 0),
            Self::PageRank => (1, 0),
            Self::Betweenness => (2, 0),
            Self::Random { seed } => (3, seed),
        }
    }

    pub(crate) fn from_code(kind: u8, seed: u64) -> Option<Self> {
        Some(match kind {
            0 => Self::Degree,
            1 => Self::PageRank,
            2 => Self::Betweenness,
            3 => Self::Random { seed },
            _ => return None,
        })
    }
}

pub fn importance_scores(g: &Graph, strategy: ImportanceStrategy) -> Vec<f64> {
    match strategy {
        ImportanceStrategy::Degree => g.degrees().into_iter().map(|d| d as f64).collect(),
        ImportanceStrategy::PageRank => pagerank(g),
        ImportanceStrategy::Betweenness => betweenness(g),
        ImportanceStrategy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..g.node_count()).map(|_| rng.random::<f64>()).collect()
        }
    }
}

/// Power iteration; mass of isolated nodes is spread uniformly.
fn pagerank(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    for _ in 0..PAGERANK_MAX_ITERS {
        let dangling: f64 = (0..n).filter(|&v| g.degree(v) == 0).map(|v| rank[v]).sum();
        let base = (1.0 - PAGERANK_DAMPING) / nf + PAGERANK_DAMPING * dangling / nf;
        let next: Vec<f64> = (0..n)
            .map(|v| {
                let inflow: f64 = g
                    .neighbors(v)
                    .iter()
                    .map(|&u| rank[u] / g.degree(u) as f64)
                    .sum();
                base + PAGERANK_DAMPING * inflow
            })
            .collect();
        let change: f64 = next.iter().zip(&rank).map(|(a, b)| (a - b).abs()).sum();
        rank = next;
        if change < PAGERANK_TOL {
            break;
        }
    }
    rank
}

/// Brandes accumulation over all sources; undirected pairs counted once.
fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut centrality = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    centrality.iter_mut().for_each(|c| *c /= 2.0);
    centrality
}
