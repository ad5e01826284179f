//! Graph structural tokenization: hop/rank structural attributes, a
//! quantized graph autoencoder that maps each graph to one `<SOG_k>` token,
//! and the corpus, prompt and evaluation tooling around it.

pub mod attributes;
pub mod checkpoint;
pub mod corpus;
pub mod graph;
pub mod ingest;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod synthetic;
pub mod token;
pub mod train;

pub use graph::{
    augment_with_global_node, build_adjacency, ego_graph, permute, AdjacencyMatrix, EgoGraph,
    Graph, GraphError, NodeRecord, DEFAULT_MAX_NODES,
};
pub use token::{StructuralToken, TokenAssignment};
pub use train::{train, train_with, TokenizerModel, TrainConfig, TrainError};
