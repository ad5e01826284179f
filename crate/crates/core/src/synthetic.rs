//! Seeded synthetic graph families and molecule sets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attributes::{assign_attributes, ImportanceStrategy};
use crate::graph::Graph;

pub const FAMILY_NAMES: [&str; 3] = ["cycle", "star", "clique"];

pub fn cycle(id: impl Into<String>, n: usize) -> Graph {
    assert!(n >= 3, "cycle needs at least 3 nodes");
    Graph::from_edges(id, n, (0..n).map(|i| (i, (i + 1) % n))).expect("valid cycle")
}

pub fn star(id: impl Into<String>, n: usize) -> Graph {
    assert!(n >= 2, "star needs at least 2 nodes");
    Graph::from_edges(id, n, (1..n).map(|i| (0, i))).expect("valid star")
}

/// Complete graph on `n` nodes with up to `drop` random edges removed, keeping
/// every node at degree `n - 2` or more.
pub fn near_clique<R: Rng>(id: impl Into<String>, n: usize, drop: usize, rng: &mut R) -> Graph {
    let mut edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    edges.shuffle(rng);
    let mut touched = vec![false; n];
    let mut kept = Vec::with_capacity(edges.len());
    let mut dropped = 0;
    for (a, b) in edges {
        if dropped < drop && !touched[a] && !touched[b] {
            touched[a] = true;
            touched[b] = true;
            dropped += 1;
        } else {
            kept.push((a, b));
        }
    }
    Graph::from_edges(id, n, kept).expect("valid near-clique")
}

/// `per_family` graphs from each of cycles, stars and near-cliques with 6 to
/// 12 nodes. Returns graphs with their family index.
pub fn synthetic_families(per_family: usize, seed: u64) -> Vec<(Graph, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_family * 3);
    for (family, name) in FAMILY_NAMES.iter().enumerate() {
        for i in 0..per_family {
            let n = rng.random_range(6..=12);
            let id = format!("{name}_{i:03}");
            let g = match family {
                0 => cycle(id, n),
                1 => star(id, n),
                _ => {
                    let drop = rng.random_range(0..=2);
                    near_clique(id, n, drop, &mut rng)
                }
            };
            out.push((g, family));
        }
    }
    out
}

/// Random connected graph: a random tree plus `extra` random chords.
pub fn random_connected<R: Rng>(
    id: impl Into<String>,
    n: usize,
    extra: usize,
    rng: &mut R,
) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    if n >= 2 {
        for _ in 0..extra {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                edges.push((a, b));
            }
        }
    }
    Graph::from_edges(id, n, edges).expect("valid random graph")
}

/// Connected graphs whose ranking under `strategy` needs no index fallback.
/// Candidates are drawn until `count` pass.
pub fn strict_ranking_graphs(count: usize, strategy: ImportanceStrategy, seed: u64) -> Vec<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.random_range(5..=9);
        let extra = rng.random_range(0..=3);
        let g = random_connected(format!("strict_{:03}", out.len()), n, extra, &mut rng);
        if assign_attributes(&g, strategy)
            .map(|m| m.strict)
            .unwrap_or(false)
        {
            out.push(g);
        }
    }
    out
}

pub const SCAFFOLD_SMILES: [&str; 10] = [
    "c1ccccc1",
    "C1CCCC1",
    "C1CC1",
    "C1CCC1",
    "c1ccc2ccccc2c1",
    "c1ccc(cc1)c1ccccc1",
    "c1ccc(cc1)Cc1ccccc1",
    "C1CCCCCC1",
    "c1ccc2CCCc2c1",
    "C1CCC2(CC1)CCCC2",
];

const PREFIXES: [&str; 5] = ["", "C", "CC", "OC", "NCC"];
const SUFFIXES: [&str; 4] = ["", "C", "O", "CCl"];

/// 200 molecules: every scaffold with 5 acyclic prefixes and 4 acyclic
/// suffixes. Returns `(id, smiles, scaffold index)`.
pub fn scaffold_molecules() -> Vec<(String, String, usize)> {
    let mut out = Vec::with_capacity(200);
    for (s, core) in SCAFFOLD_SMILES.iter().enumerate() {
        for (p, prefix) in PREFIXES.iter().enumerate() {
            for (q, suffix) in SUFFIXES.iter().enumerate() {
                out.push((format!("m{s}_{p}_{q}"), attach(prefix, core, suffix), s));
            }
        }
    }
    out
}

/// Substituents hang off the first and last ring atoms.
fn attach(prefix: &str, core: &str, suffix: &str) -> String {
    format!("{prefix}{core}{suffix}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{murcko_scaffold, smiles_to_graph};

    #[test]
    fn families_have_expected_shapes() {
        let data = synthetic_families(5, 1);
        assert_eq!(data.len(), 15);
        for (g, fam) in &data {
            let n = g.node_count();
            assert!((6..=12).contains(&n));
            match fam {
                0 => assert!(g.degrees().iter().all(|&d| d == 2)),
                1 => assert_eq!(g.edge_count(), n - 1),
                _ => assert!(g.degrees().iter().all(|&d| d + 2 >= n)),
            }
        }
        assert_eq!(
            synthetic_families(5, 1)
                .iter()
                .map(|(g, _)| g.edges().to_vec())
                .collect::<Vec<_>>(),
            data.iter()
                .map(|(g, _)| g.edges().to_vec())
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn strict_graphs_are_strict_and_connected() {
        for g in strict_ranking_graphs(10, ImportanceStrategy::Degree, 3) {
            assert!(
                assign_attributes(&g, ImportanceStrategy::Degree)
                    .unwrap()
                    .strict
            );
            assert!(g.bfs_distances(0).iter().all(Option::is_some));
        }
    }

    #[test]
    fn molecules_parse_and_share_scaffolds() {
        let mols = scaffold_molecules();
        assert_eq!(mols.len(), 200);
        let mut keys = vec![None; 10];
        for (id, smi, s) in &mols {
            let g = smiles_to_graph(smi, id).unwrap_or_else(|e| panic!("{smi}: {e}"));
            let key = murcko_scaffold(&g).canonical_key;
            match &keys[*s] {
                None => keys[*s] = Some(key),
                Some(k) => assert_eq!(k, &key, "{smi}"),
            }
        }
        let mut distinct: Vec<_> = keys.into_iter().flatten().collect();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 10);
    }
}
