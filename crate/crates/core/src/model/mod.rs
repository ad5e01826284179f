//! Quantized graph autoencoder: GCN encoder, codebook, linear decoder,
//! loss, analytic gradients and Adam.

mod adam;
mod codebook;
mod gcn;
mod loss;
mod network;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use codebook::{
    kmeans_codebook, nearest_entry, quantize, Codebook, QuantizedSelection, GAUSSIAN_INIT_STD,
    KMEANS_ITERS,
};
pub use gcn::{encode, encode_traced, glorot, normalized_adjacency, EncoderParams, EncoderTrace};
pub use loss::{
    compute_loss, decode, decode_and_reconstruct, gram, reconstruction_loss, squared_gap,
    DecoderParams, LossBreakdown, ReconstructionMode,
};
pub use network::{
    backward, forward, BatchState, ForwardState, Gradients, GraphInput, LossOptions, Phase,
    VqParams,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("backward called without a retained forward pass")]
    NoForwardState,
    #[error("non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

impl ModelError {
    pub(crate) fn dims(what: &'static str, expected: usize, found: usize) -> Self {
        Self::DimensionMismatch {
            what,
            expected,
            found,
        }
    }
}
