//! Forward pass with retained activations and the analytic backward pass.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::codebook::{quantize, Codebook, QuantizedSelection};
use super::gcn::{
    encode_traced, encoder_backward, normalized_adjacency, EncoderParams, EncoderTrace,
};
use super::loss::{
    decode, reconstruction_grad, reconstruction_loss, squared_gap, DecoderParams, LossBreakdown,
    ReconstructionMode,
};
use super::ModelError;
use crate::graph::AdjacencyMatrix;

/// All trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VqParams {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub codebook: Codebook,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossOptions {
    pub beta: f64,
    pub mode: ReconstructionMode,
    /// Copy the decoder-input gradient to the encoder output.
    pub straight_through: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            beta: 0.25,
            mode: ReconstructionMode::Frobenius,
            straight_through: true,
        }
    }
}

/// Warm-up decodes the unquantized latents and optimizes reconstruction only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Joint,
}

/// Per-graph inputs that stay fixed across epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub target: Array2<f64>,
    pub a_norm: Array2<f64>,
    pub features: Array2<f64>,
}

impl GraphInput {
    pub fn new(adjacency: &AdjacencyMatrix, features: Array2<f64>) -> Result<Self, ModelError> {
        if features.nrows() != adjacency.n() {
            return Err(ModelError::dims(
                "feature rows",
                adjacency.n(),
                features.nrows(),
            ));
        }
        Ok(Self {
            target: adjacency.as_array().clone(),
            a_norm: normalized_adjacency(adjacency),
            features,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ForwardState<'a> {
    pub input: &'a GraphInput,
    pub phase: Phase,
    pub trace: EncoderTrace,
    /// `None` during warm-up.
    pub selection: Option<QuantizedSelection>,
    pub x_hat: Array2<f64>,
    pub a_rec: Array2<f64>,
    pub loss: LossBreakdown,
}

impl ForwardState<'_> {
    pub fn latent(&self) -> &Array2<f64> {
        &self.trace.latent
    }
}

pub fn forward<'a>(
    params: &VqParams,
    input: &'a GraphInput,
    phase: Phase,
    opts: &LossOptions,
) -> Result<ForwardState<'a>, ModelError> {
    let trace = encode_traced(&input.a_norm, &input.features, &params.encoder)?;
    let (selection, x_hat, a_rec, loss) = match phase {
        Phase::Warmup => {
            let (x_hat, a_rec) = decode(&trace.latent, &params.decoder)?;
            let recon = reconstruction_loss(&input.target, &a_rec, opts.mode);
            (
                None,
                x_hat,
                a_rec,
                LossBreakdown::new(recon, 0.0, 0.0, opts.beta),
            )
        }
        Phase::Joint => {
            let sel = quantize(&trace.latent, &params.codebook)?;
            let (x_hat, a_rec) = decode(&sel.quantized, &params.decoder)?;
            let recon = reconstruction_loss(&input.target, &a_rec, opts.mode);
            let gap = squared_gap(&trace.latent, &sel.quantized);
            (
                Some(sel),
                x_hat,
                a_rec,
                LossBreakdown::new(recon, gap, gap, opts.beta),
            )
        }
    };
    Ok(ForwardState {
        input,
        phase,
        trace,
        selection,
        x_hat,
        a_rec,
        loss,
    })
}

/// Forward passes of one optimization step. The step's loss is their mean.
#[derive(Debug, Clone, Default)]
pub struct BatchState<'a> {
    pub states: Vec<ForwardState<'a>>,
}

impl BatchState<'_> {
    pub fn mean_loss(&self) -> Option<LossBreakdown> {
        if self.states.is_empty() {
            return None;
        }
        let n = self.states.len() as f64;
        let beta = self.states[0].loss.beta;
        let (mut r, mut u, mut c) = (0.0, 0.0, 0.0);
        for s in &self.states {
            r += s.loss.reconstruction;
            u += s.loss.update;
            c += s.loss.commitment;
        }
        Some(LossBreakdown::new(r / n, u / n, c / n, beta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub wd: Array2<f64>,
    pub codebook: Array2<f64>,
}

impl Gradients {
    pub fn zeros_like(p: &VqParams) -> Self {
        Self {
            w1: Array2::zeros(p.encoder.w1.dim()),
            w2: Array2::zeros(p.encoder.w2.dim()),
            wd: Array2::zeros(p.decoder.wd.dim()),
            codebook: Array2::zeros(p.codebook.entries.dim()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        [&self.w1, &self.w2, &self.wd, &self.codebook]
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gradients of the mean batch loss.
pub fn backward(
    batch: &BatchState,
    params: &VqParams,
    opts: &LossOptions,
) -> Result<Gradients, ModelError> {
    if batch.states.is_empty() {
        return Err(ModelError::NoForwardState);
    }
    let scale = 1.0 / batch.states.len() as f64;
    let mut grads = Gradients::zeros_like(params);
    for st in &batch.states {
        let g_rec = reconstruction_grad(&st.input.target, &st.a_rec, opts.mode);
        // d(X Xᵀ) with upstream G gives (G + Gᵀ) X
        let d_x_hat = (&g_rec + &g_rec.t()).dot(&st.x_hat);
        let d_z = d_x_hat.dot(&params.decoder.wd.t());
        let h = &st.trace.latent;
        let d_latent = match (&st.selection, st.phase) {
            (None, _) | (_, Phase::Warmup) => {
                grads.wd.scaled_add(scale, &h.t().dot(&d_x_hat));
                d_z
            }
            (Some(sel), Phase::Joint) => {
                grads.wd.scaled_add(scale, &sel.quantized.t().dot(&d_x_hat));
                for (i, &k) in sel.indices.iter().enumerate() {
                    let mut row = grads.codebook.row_mut(k);
                    row.scaled_add(2.0 * scale, &(&params.codebook.entries.row(k) - &h.row(i)));
                }
                let mut d = (h - &sel.quantized) * (2.0 * opts.beta);
                if opts.straight_through {
                    d += &d_z;
                }
                d
            }
        };
        let (d_w1, d_w2) =
            encoder_backward(&st.input.a_norm, &st.trace, &params.encoder, &d_latent);
        grads.w1.scaled_add(scale, &d_w1);
        grads.w2.scaled_add(scale, &d_w2);
    }
    Ok(grads)
}
