//! Hierarchical structural attributes: anchor selection, hop labels,
//! within-hop ranks, and their vector embeddings.

mod assign;
mod embed;
mod importance;

pub use assign::{
    assign_attributes, disconnected_attribute, hop_attribute, AttributeError,
    StructuralAttributeMap, ANCHOR_ATTRIBUTE, GLOBAL_ATTRIBUTE,
};
pub use embed::{
    attribute_tokens, embed_attributes, embed_node_attributes, AttributeEmbedder, EmbedError,
    Embedder, FeatureMatrix, HashingEmbedder, TableEmbedder, DEFAULT_FEATURE_DIM,
    DEFAULT_HASH_SEED,
};
pub use importance::{importance_scores, ImportanceStrategy};
