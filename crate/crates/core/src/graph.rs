//! Undirected simple graphs, adjacency construction, relabeling and ego-graphs.

use std::collections::VecDeque;

use ndarray::Array2;
use thiserror::Error;

/// Node cap applied at construction unless a caller raises it.
pub const DEFAULT_MAX_NODES: usize = 512;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("edge ({0}, {1}) references a node outside [0, {2})")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("graph has {nodes} nodes, limit is {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("graph already carries a global node")]
    AlreadyAugmented,
    #[error("more than one global node")]
    MultipleGlobalNodes,
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("node {node} out of range for graph with {len} nodes")]
    NodeOutOfRange { node: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub index: usize,
    pub text: Option<String>,
    pub is_global: bool,
}

/// Immutable undirected simple graph.
///
/// Edges are stored normalized as `(i, j)` with `i < j`, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    id: String,
    nodes: Vec<NodeRecord>,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    label: Option<i64>,
    graph_text: Option<String>,
}

impl Graph {
    /// Builds a graph from per-node optional text and an edge list.
    ///
    /// Directed or duplicated input edges are symmetrized and deduplicated.
    pub fn new(
        id: impl Into<String>,
        node_text: Vec<Option<String>>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::with_limit(id, node_text, edges, DEFAULT_MAX_NODES)
    }

    pub fn with_limit(
        id: impl Into<String>,
        node_text: Vec<Option<String>>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        max_nodes: usize,
    ) -> Result<Self, GraphError> {
        let n = node_text.len();
        if n > max_nodes {
            return Err(GraphError::TooLarge {
                nodes: n,
                limit: max_nodes,
            });
        }
        let nodes = node_text
            .into_iter()
            .enumerate()
            .map(|(index, text)| NodeRecord {
                index,
                text,
                is_global: false,
            })
            .collect();
        Self::from_parts(id.into(), nodes, edges)
    }

    /// Unlabeled graph with `n` text-free nodes.
    pub fn from_edges(
        id: impl Into<String>,
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::new(id, vec![None; n], edges)
    }

    fn from_parts(
        id: String,
        nodes: Vec<NodeRecord>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let n = nodes.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if nodes.iter().filter(|r| r.is_global).count() > 1 {
            return Err(GraphError::MultipleGlobalNodes);
        }
        let mut normalized = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::EdgeOutOfRange(a, b, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &normalized {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            id,
            nodes,
            edges: normalized,
            neighbors,
            label: None,
            graph_text: None,
        })
    }

    pub fn with_label(mut self, label: Option<i64>) -> Self {
        self.label = label;
        self
    }

    pub fn with_graph_text(mut self, text: Option<String>) -> Self {
        self.graph_text = text;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn label(&self) -> Option<i64> {
        self.label
    }

    pub fn graph_text(&self) -> Option<&str> {
        self.graph_text.as_deref()
    }

    pub fn global_node(&self) -> Option<usize> {
        self.nodes.iter().position(|r| r.is_global)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.nodes.len() && self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn check_size(&self, limit: usize) -> Result<(), GraphError> {
        if self.node_count() > limit {
            Err(GraphError::TooLarge {
                nodes: self.node_count(),
                limit,
            })
        } else {
            Ok(())
        }
    }

    /// BFS hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].unwrap_or_default();
            for &w in &self.neighbors[v] {
                if dist[w].is_none() {
                    dist[w] = Some(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Induced subgraph on `keep` (in the given order); node `keep[i]` becomes node `i`.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Graph, GraphError> {
        let mut new_index = vec![usize::MAX; self.node_count()];
        for (i, &old) in keep.iter().enumerate() {
            if old >= self.node_count() {
                return Err(GraphError::NodeOutOfRange {
                    node: old,
                    len: self.node_count(),
                });
            }
            new_index[old] = i;
        }
        let nodes = keep
            .iter()
            .enumerate()
            .map(|(i, &old)| NodeRecord {
                index: i,
                text: self.nodes[old].text.clone(),
                is_global: self.nodes[old].is_global,
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter(|&&(a, b)| new_index[a] != usize::MAX && new_index[b] != usize::MAX)
            .map(|&(a, b)| (new_index[a], new_index[b]))
            .collect();
        Ok(Self::from_parts(self.id.clone(), nodes, edges)?
            .with_label(self.label)
            .with_graph_text(self.graph_text.clone()))
    }
}

/// Dense symmetric 0/1 adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    entries: Array2<f64>,
}

impl AdjacencyMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[[i, j]] != 0.0
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_array(self) -> Array2<f64> {
        self.entries
    }
}

pub fn build_adjacency(g: &Graph) -> AdjacencyMatrix {
    let n = g.node_count();
    let mut entries = Array2::zeros((n, n));
    for &(a, b) in g.edges() {
        entries[[a, b]] = 1.0;
        entries[[b, a]] = 1.0;
    }
    AdjacencyMatrix { entries }
}

/// Adds a virtual node at index `|V|` connected to every original node.
pub fn augment_with_global_node(g: &Graph) -> Result<Graph, GraphError> {
    if g.global_node().is_some() {
        return Err(GraphError::AlreadyAugmented);
    }
    let n = g.node_count();
    let mut nodes = g.nodes.clone();
    nodes.push(NodeRecord {
        index: n,
        text: None,
        is_global: true,
    });
    let edges = g.edges.iter().copied().chain((0..n).map(|i| (i, n)));
    Ok(Graph::from_parts(g.id.clone(), nodes, edges)?
        .with_label(g.label)
        .with_graph_text(g.graph_text.clone()))
}

/// Relabels nodes so that old node `i` becomes node `perm[i]`.
pub fn permute(g: &Graph, perm: &[usize]) -> Result<Graph, GraphError> {
    let n = g.node_count();
    if perm.len() != n {
        return Err(GraphError::InvalidPermutation(format!(
            "length {} for {} nodes",
            perm.len(),
            n
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(GraphError::InvalidPermutation(format!(
                "{perm:?} is not a bijection on 0..{n}"
            )));
        }
        seen[p] = true;
    }
    let mut slots: Vec<Option<NodeRecord>> = vec![None; n];
    for (old, record) in g.nodes.iter().enumerate() {
        slots[perm[old]] = Some(NodeRecord {
            index: perm[old],
            ..record.clone()
        });
    }
    let nodes = slots.into_iter().flatten().collect();
    let edges = g.edges.iter().map(|&(a, b)| (perm[a], perm[b]));
    Ok(Graph::from_parts(g.id.clone(), nodes, edges)?
        .with_label(g.label)
        .with_graph_text(g.graph_text.clone()))
}

/// Induced subgraph around a center node, with the index mapping back to the source graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoGraph {
    pub graph: Graph,
    /// `new_to_old[i]` is the source index of ego node `i`; the center is at 0.
    pub new_to_old: Vec<usize>,
}

impl EgoGraph {
    pub fn new_index_of(&self, old: usize) -> Option<usize> {
        self.new_to_old.iter().position(|&o| o == old)
    }
}

/// All nodes within `hops` edges of `center`; the center becomes index 0 and
/// the remaining nodes keep their relative source order.
pub fn ego_graph(g: &Graph, center: usize, hops: usize) -> Result<EgoGraph, GraphError> {
    if center >= g.node_count() {
        return Err(GraphError::NodeOutOfRange {
            node: center,
            len: g.node_count(),
        });
    }
    let dist = g.bfs_distances(center);
    let mut keep = vec![center];
    keep.extend((0..g.node_count()).filter(|&v| v != center && dist[v].is_some_and(|d| d <= hops)));
    let graph = g.induced_subgraph(&keep)?;
    Ok(EgoGraph {
        graph,
        new_to_old: keep,
    })
}
