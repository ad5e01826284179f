use std::cmp::Ordering;

use thiserror::Error;

use super::importance::{importance_scores, ImportanceStrategy};
use crate::graph::Graph;

pub const ANCHOR_ATTRIBUTE: &str = "anchor node";
pub const GLOBAL_ATTRIBUTE: &str = "global summary node";

/// Scores closer than this are treated as tied, so float noise in iterative
/// measures cannot decide a ranking.
const SCORE_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AttributeError {
    #[error("attribute assignment expects a graph without a global node")]
    GlobalNodePresent,
}

/// Per-node hop/rank coordinates relative to the anchor, and their attribute strings.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralAttributeMap {
    pub anchor: usize,
    /// Hop distance from the anchor; `None` for nodes in other components.
    pub hop_of: Vec<Option<usize>>,
    /// 1-based rank within the node's hop (or among disconnected nodes).
    pub rank_of: Vec<usize>,
    pub attribute_of: Vec<String>,
    pub global_attribute: String,
    /// True when no ranking decision fell back to node indices.
    pub strict: bool,
}

impl StructuralAttributeMap {
    pub fn node_count(&self) -> usize {
        self.hop_of.len()
    }

    /// Nodes ordered by (hop, rank) with disconnected nodes last. This order
    /// depends only on structure when `strict` holds.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.node_count()).collect();
        order.sort_by_key(|&v| (self.hop_of[v].unwrap_or(usize::MAX), self.rank_of[v]));
        order
    }

    /// All attribute strings, node order, global last.
    pub fn strings(&self) -> impl Iterator<Item = &str> {
        self.attribute_of
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.global_attribute.as_str()))
    }
}

const ORDINALS: [&str; 10] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];

pub fn hop_attribute(hop: usize, rank: usize) -> String {
    match hop {
        0 => ANCHOR_ATTRIBUTE.to_string(),
        1..=10 => format!("{}-hop neighbor #{rank}", ORDINALS[hop - 1]),
        k => format!("{k}-th-hop neighbor #{rank}"),
    }
}

pub fn disconnected_attribute(rank: usize) -> String {
    format!("disconnected node #{rank}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RankKey {
    score: i64,
    neighbor_degrees: Vec<usize>,
}

impl RankKey {
    /// Descending importance, then descending neighbor-degree multiset.
    fn cmp_desc(&self, other: &Self) -> Ordering {
        other
            .score
            .cmp(&self.score)
            .then_with(|| other.neighbor_degrees.cmp(&self.neighbor_degrees))
    }
}

fn rank_keys(g: &Graph, scores: &[f64]) -> Vec<RankKey> {
    (0..g.node_count())
        .map(|v| {
            let mut neighbor_degrees: Vec<usize> =
                g.neighbors(v).iter().map(|&u| g.degree(u)).collect();
            neighbor_degrees.sort_unstable_by(|a, b| b.cmp(a));
            RankKey {
                score: (scores[v] / SCORE_RESOLUTION).round() as i64,
                neighbor_degrees,
            }
        })
        .collect()
}

/// Sorts `nodes` best-first; returns whether every adjacent pair was decided
/// without the index fallback.
fn sort_by_rank(nodes: &mut [usize], keys: &[RankKey]) -> bool {
    nodes.sort_by(|&a, &b| keys[a].cmp_desc(&keys[b]).then(a.cmp(&b)));
    nodes
        .windows(2)
        .all(|w| keys[w[0]].cmp_desc(&keys[w[1]]) != Ordering::Equal)
}

/// Layer sizes of a BFS from `v`, compared so that larger reach, then fewer
/// layers, then wider early layers win.
fn layer_profile(hops: &[Option<usize>]) -> (usize, std::cmp::Reverse<usize>, Vec<usize>) {
    let mut sizes = Vec::new();
    for &h in hops.iter().flatten() {
        if h >= sizes.len() {
            sizes.resize(h + 1, 0);
        }
        sizes[h] += 1;
    }
    (
        hops.iter().flatten().count(),
        std::cmp::Reverse(sizes.len()),
        sizes,
    )
}

/// Breaks an anchor tie by BFS layer profile, then by index. Candidates with
/// equal profiles yield the same attribute multiset.
fn pick_anchor(g: &Graph, candidates: &[usize]) -> (usize, Vec<Option<usize>>, bool) {
    let mut scored: Vec<(usize, Vec<Option<usize>>)> = candidates
        .iter()
        .map(|&v| (v, g.bfs_distances(v)))
        .collect();
    let profiles: Vec<_> = scored.iter().map(|(_, h)| layer_profile(h)).collect();
    let best = (0..scored.len())
        .max_by(|&a, &b| {
            profiles[a]
                .cmp(&profiles[b])
                .then(scored[b].0.cmp(&scored[a].0))
        })
        .expect("at least one candidate");
    let unique = profiles.iter().filter(|p| **p == profiles[best]).count() == 1;
    let (anchor, hops) = scored.swap_remove(best);
    (anchor, hops, unique)
}

pub fn assign_attributes(
    g: &Graph,
    strategy: ImportanceStrategy,
) -> Result<StructuralAttributeMap, AttributeError> {
    if g.global_node().is_some() {
        return Err(AttributeError::GlobalNodePresent);
    }
    let n = g.node_count();
    let scores = importance_scores(g, strategy);
    let keys = rank_keys(g, &scores);

    let mut all: Vec<usize> = (0..n).collect();
    sort_by_rank(&mut all, &keys);
    let tied = all
        .iter()
        .take_while(|&&v| keys[v].cmp_desc(&keys[all[0]]) == Ordering::Equal)
        .count();
    let (anchor, hop_of, mut strict) = if tied <= 1 {
        (all[0], g.bfs_distances(all[0]), true)
    } else {
        pick_anchor(g, &all[..tied])
    };
    let max_hop = hop_of.iter().flatten().copied().max().unwrap_or(0);
    let mut rank_of = vec![0; n];
    let mut attribute_of = vec![String::new(); n];

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); max_hop + 1];
    let mut disconnected = Vec::new();
    for (v, hop) in hop_of.iter().enumerate() {
        match *hop {
            Some(h) => groups[h].push(v),
            None => disconnected.push(v),
        }
    }
    for (hop, members) in groups.iter_mut().enumerate() {
        strict &= sort_by_rank(members, &keys);
        for (i, &v) in members.iter().enumerate() {
            rank_of[v] = i + 1;
            attribute_of[v] = hop_attribute(hop, i + 1);
        }
    }
    strict &= sort_by_rank(&mut disconnected, &keys);
    for (i, &v) in disconnected.iter().enumerate() {
        rank_of[v] = i + 1;
        attribute_of[v] = disconnected_attribute(i + 1);
    }

    Ok(StructuralAttributeMap {
        anchor,
        hop_of,
        rank_of,
        attribute_of,
        global_attribute: GLOBAL_ATTRIBUTE.to_string(),
        strict,
    })
}
