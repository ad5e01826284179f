//! Decoder, adjacency reconstruction and the three-term quantization loss.

use ndarray::{Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::codebook::QuantizedSelection;
use super::gcn::glorot;
use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// `d x d_r`
    pub wd: Array2<f64>,
}

impl DecoderParams {
    pub fn glorot<R: Rng>(d: usize, d_r: usize, rng: &mut R) -> Self {
        Self {
            wd: glorot(d, d_r, rng),
        }
    }
}

/// How the reconstructed adjacency is compared with the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructionMode {
    /// Squared Frobenius gap between raw `X̂X̂ᵀ` and the 0/1 target.
    #[default]
    Frobenius,
    /// Binary cross-entropy with `X̂X̂ᵀ` taken as logits.
    Logistic,
}

/// `X̂X̂ᵀ`, filled symmetrically so the result is exactly symmetric.
pub fn gram(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = x.row(i).dot(&x.row(j));
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// `X̂ = Z Wd` and `Â = X̂X̂ᵀ`.
pub fn decode(
    z: &Array2<f64>,
    dec: &DecoderParams,
) -> Result<(Array2<f64>, Array2<f64>), ModelError> {
    if z.ncols() != dec.wd.nrows() {
        return Err(ModelError::dims("decoder input", dec.wd.nrows(), z.ncols()));
    }
    let x_hat = z.dot(&dec.wd);
    let a_rec = gram(&x_hat);
    Ok((x_hat, a_rec))
}

pub fn decode_and_reconstruct(
    sel: &QuantizedSelection,
    dec: &DecoderParams,
) -> Result<(Array2<f64>, Array2<f64>), ModelError> {
    decode(&sel.quantized, dec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub update: f64,
    pub commitment: f64,
    pub beta: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(reconstruction: f64, update: f64, commitment: f64, beta: f64) -> Self {
        Self {
            reconstruction,
            update,
            commitment,
            beta,
            total: reconstruction + update + beta * commitment,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.reconstruction.is_finite()
            && self.update.is_finite()
            && self.commitment.is_finite()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn reconstruction_loss(
    target: &Array2<f64>,
    a_rec: &Array2<f64>,
    mode: ReconstructionMode,
) -> f64 {
    match mode {
        ReconstructionMode::Frobenius => Zip::from(target)
            .and(a_rec)
            .fold(0.0, |acc, &t, &r| acc + (t - r) * (t - r)),
        ReconstructionMode::Logistic => Zip::from(target)
            .and(a_rec)
            .fold(0.0, |acc, &t, &r| acc + softplus(r) - t * r),
    }
}

/// `dL/dÂ` for the reconstruction term.
pub(crate) fn reconstruction_grad(
    target: &Array2<f64>,
    a_rec: &Array2<f64>,
    mode: ReconstructionMode,
) -> Array2<f64> {
    match mode {
        ReconstructionMode::Frobenius => Zip::from(a_rec)
            .and(target)
            .map_collect(|&r, &t| 2.0 * (r - t)),
        ReconstructionMode::Logistic => Zip::from(a_rec)
            .and(target)
            .map_collect(|&r, &t| sigmoid(r) - t),
    }
}

pub fn squared_gap(h: &Array2<f64>, q: &Array2<f64>) -> f64 {
    Zip::from(h)
        .and(q)
        .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b))
}

/// Three-term loss. The update and commitment terms share a value and differ
/// only in which side the stop-gradient freezes.
pub fn compute_loss(
    target: &Array2<f64>,
    a_rec: &Array2<f64>,
    h: &Array2<f64>,
    sel: &QuantizedSelection,
    beta: f64,
    mode: ReconstructionMode,
) -> Result<LossBreakdown, ModelError> {
    if target.dim() != a_rec.dim() {
        return Err(ModelError::dims(
            "reconstruction size",
            target.nrows(),
            a_rec.nrows(),
        ));
    }
    if h.dim() != sel.quantized.dim() {
        return Err(ModelError::dims(
            "quantized rows",
            h.nrows(),
            sel.quantized.nrows(),
        ));
    }
    let recon = reconstruction_loss(target, a_rec, mode);
    let gap = squared_gap(h, &sel.quantized);
    Ok(LossBreakdown::new(recon, gap, gap, beta))
}
