//! Ring-system-plus-linker scaffolds by iterative leaf pruning, plus grouping
//! of scaffolds into equivalence buckets.

use std::collections::BTreeMap;

use crate::graph::Graph;

pub const EMPTY_SCAFFOLD_KEY: &str = "EMPTY";

#[derive(Debug, Clone, PartialEq)]
pub struct Scaffold {
    /// Surviving subgraph; `None` when pruning removed every node.
    pub graph: Option<Graph>,
    /// Source indices of the surviving nodes, ascending.
    pub kept: Vec<usize>,
    pub canonical_key: String,
}

impl Scaffold {
    pub fn is_empty(&self) -> bool {
        self.graph.is_none()
    }
}

/// Repeatedly removes nodes of degree <= 1 until none remain.
pub fn murcko_scaffold(g: &Graph) -> Scaffold {
    let n = g.node_count();
    let mut alive = vec![true; n];
    let mut degree = g.degrees();
    let mut stack: Vec<usize> = (0..n).filter(|&v| degree[v] <= 1).collect();
    while let Some(v) = stack.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &w in g.neighbors(v) {
            if alive[w] {
                degree[w] -= 1;
                if degree[w] == 1 {
                    stack.push(w);
                }
            }
        }
    }
    let kept: Vec<usize> = (0..n).filter(|&v| alive[v]).collect();
    if kept.is_empty() {
        return Scaffold {
            graph: None,
            kept,
            canonical_key: EMPTY_SCAFFOLD_KEY.to_string(),
        };
    }
    let graph = g
        .induced_subgraph(&kept)
        .expect("kept indices come from the source graph");
    let canonical_key = canonical_key(&graph);
    Scaffold {
        graph: Some(graph),
        kept,
        canonical_key,
    }
}

/// Isomorphism-invariant fingerprint: node count, edge count, sorted degree
/// sequence and sorted per-node triangle counts.
pub fn canonical_key(g: &Graph) -> String {
    let mut degrees = g.degrees();
    degrees.sort_unstable();
    let mut triangles: Vec<usize> = (0..g.node_count())
        .map(|v| {
            let nb = g.neighbors(v);
            let mut count = 0;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if g.has_edge(a, b) {
                        count += 1;
                    }
                }
            }
            count
        })
        .collect();
    triangles.sort_unstable();
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    format!(
        "n={};e={};deg={};tri={}",
        g.node_count(),
        g.edge_count(),
        join(&degrees),
        join(&triangles)
    )
}

/// Exact isomorphism test by degree-pruned backtracking.
pub fn are_isomorphic(a: &Graph, b: &Graph) -> bool {
    if a.node_count() != b.node_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    let (mut da, mut db) = (a.degrees(), b.degrees());
    da.sort_unstable();
    db.sort_unstable();
    if da != db {
        return false;
    }
    let n = a.node_count();
    // match high-degree nodes first to prune early
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(a.degree(v)));
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];

    fn extend(
        depth: usize,
        order: &[usize],
        a: &Graph,
        b: &Graph,
        map: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let v = order[depth];
        for w in 0..b.node_count() {
            if used[w] || a.degree(v) != b.degree(w) {
                continue;
            }
            let consistent = order[..depth]
                .iter()
                .all(|&u| a.has_edge(u, v) == b.has_edge(map[u], w));
            if !consistent {
                continue;
            }
            map[v] = w;
            used[w] = true;
            if extend(depth + 1, order, a, b, map, used) {
                return true;
            }
            used[w] = false;
            map[v] = usize::MAX;
        }
        false
    }

    extend(0, &order, a, b, &mut map, &mut used)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaffoldGrouping {
    /// Bucket by fingerprint only.
    FingerprintOnly,
    /// Split fingerprint buckets by exact isomorphism when both scaffolds
    /// have at most `max_nodes` nodes.
    FingerprintWithIsomorphism { max_nodes: usize },
}

impl Default for ScaffoldGrouping {
    fn default() -> Self {
        Self::FingerprintWithIsomorphism { max_nodes: 24 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaffoldGroups {
    /// Group id per input scaffold, in input order. Ids are dense, ordered by first appearance.
    pub group_of: Vec<usize>,
    /// Fingerprint buckets that held non-isomorphic scaffolds (and were split).
    pub key_collisions: Vec<String>,
}

pub fn group_scaffolds(scaffolds: &[Scaffold], mode: ScaffoldGrouping) -> ScaffoldGroups {
    // (key) -> list of (representative scaffold index, group id)
    let mut buckets: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    let mut group_of = Vec::with_capacity(scaffolds.len());
    let mut collisions = Vec::new();
    let mut next_group = 0;
    for (i, s) in scaffolds.iter().enumerate() {
        let reps = buckets.entry(s.canonical_key.as_str()).or_default();
        let found = reps.iter().find(|&&(rep, _)| match mode {
            ScaffoldGrouping::FingerprintOnly => true,
            ScaffoldGrouping::FingerprintWithIsomorphism { max_nodes } => {
                match (&scaffolds[rep].graph, &s.graph) {
                    (Some(x), Some(y)) if x.node_count() <= max_nodes => are_isomorphic(x, y),
                    _ => true,
                }
            }
        });
        match found {
            Some(&(_, gid)) => group_of.push(gid),
            None => {
                if !reps.is_empty() && !collisions.contains(&s.canonical_key) {
                    collisions.push(s.canonical_key.clone());
                }
                reps.push((i, next_group));
                group_of.push(next_group);
                next_group += 1;
            }
        }
    }
    ScaffoldGroups {
        group_of,
        key_collisions: collisions,
    }
}
