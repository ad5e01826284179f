//! Two-layer graph convolutional encoder.

use ndarray::{Array2, Zip};
use rand::Rng;

use super::ModelError;
use crate::graph::AdjacencyMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `d_s x d_h`
    pub w1: Array2<f64>,
    /// `d_h x d`
    pub w2: Array2<f64>,
}

impl EncoderParams {
    pub fn new(w1: Array2<f64>, w2: Array2<f64>) -> Result<Self, ModelError> {
        if w1.ncols() != w2.nrows() {
            return Err(ModelError::dims(
                "encoder hidden width",
                w1.ncols(),
                w2.nrows(),
            ));
        }
        Ok(Self { w1, w2 })
    }

    pub fn glorot<R: Rng>(d_s: usize, d_h: usize, d: usize, rng: &mut R) -> Self {
        Self {
            w1: glorot(d_s, d_h, rng),
            w2: glorot(d_h, d, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.ncols()
    }
}

/// Uniform Glorot initialization.
pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalized_adjacency(a: &AdjacencyMatrix) -> Array2<f64> {
    let n = a.n();
    let mut m = a.as_array().clone();
    for i in 0..n {
        m[[i, i]] = 1.0;
    }
    let deg: Vec<f64> = m.rows().into_iter().map(|r| r.sum()).collect();
    for ((i, j), v) in m.indexed_iter_mut() {
        if *v != 0.0 {
            *v /= (deg[i] * deg[j]).sqrt();
        }
    }
    m
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTrace {
    /// `Â X`
    pub ax: Array2<f64>,
    /// `Â X W1`
    pub pre_activation: Array2<f64>,
    /// `Â ReLU(Â X W1)`
    pub propagated: Array2<f64>,
    /// `H`
    pub latent: Array2<f64>,
}

pub fn encode_traced(
    a_norm: &Array2<f64>,
    x: &Array2<f64>,
    p: &EncoderParams,
) -> Result<EncoderTrace, ModelError> {
    if a_norm.nrows() != x.nrows() {
        return Err(ModelError::dims("feature rows", a_norm.nrows(), x.nrows()));
    }
    if x.ncols() != p.input_dim() {
        return Err(ModelError::dims(
            "feature dimension",
            p.input_dim(),
            x.ncols(),
        ));
    }
    let ax = a_norm.dot(x);
    let pre_activation = ax.dot(&p.w1);
    let hidden = pre_activation.mapv(|v| v.max(0.0));
    let propagated = a_norm.dot(&hidden);
    let latent = propagated.dot(&p.w2);
    Ok(EncoderTrace {
        ax,
        pre_activation,
        propagated,
        latent,
    })
}

/// `H = Â ReLU(Â X W1) W2`.
pub fn encode(
    a: &AdjacencyMatrix,
    x: &Array2<f64>,
    p: &EncoderParams,
) -> Result<Array2<f64>, ModelError> {
    Ok(encode_traced(&normalized_adjacency(a), x, p)?.latent)
}

/// Encoder gradients given `dL/dH`.
pub(crate) fn encoder_backward(
    a_norm: &Array2<f64>,
    trace: &EncoderTrace,
    p: &EncoderParams,
    d_latent: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let d_w2 = trace.propagated.t().dot(d_latent);
    let d_propagated = d_latent.dot(&p.w2.t());
    let mut d_hidden = a_norm.t().dot(&d_propagated);
    Zip::from(&mut d_hidden)
        .and(&trace.pre_activation)
        .for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
    let d_w1 = trace.ax.t().dot(&d_hidden);
    (d_w1, d_w2)
}
