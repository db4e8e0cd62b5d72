//! Minimal differentiable kernel: dense matrices, GRU/BiGRU, pooling,
//! normalization, softmax cross-entropy and Adam. Every op has a hand-written
//! backward pass checked against finite differences.

mod adam;
mod gradcheck;
mod gru;
mod linear;
mod matrix;
mod ops;
pub mod params;

use rand::Rng;
use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckReport, FD_STEP};
pub use gru::{bigru_forward, gru_cell_forward, BiGruLayer, BiGruParams, BiGruTrace, GruLayerParams};
pub use linear::{linear_forward, LinearParams};
pub use matrix::Matrix;
pub use ops::{
    layer_norm, layer_norm_backward, log_sum_exp, maxpool_backward, maxpool_time, relu, relu_backward, softmax,
    softmax_cross_entropy, LayerNormCache, MaxPool,
};
pub use params::Parameters;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: dimension mismatch, expected {expected}, got {actual}")]
    Dimension {
        op: &'static str,
        expected: String,
        actual: String,
    },
    #[error("{op}: empty sequence")]
    EmptySequence { op: &'static str },
    #[error("target class {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Whether stochastic layers (dropout) are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
}

/// Weights drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn uniform_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let bound = 1.0 / (cols.max(1) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, otherwise
/// `1 / (1 - p)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<f64> {
    let keep_scale = if p < 1.0 { 1.0 / (1.0 - p) } else { 0.0 };
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep_scale })
        .collect()
}
