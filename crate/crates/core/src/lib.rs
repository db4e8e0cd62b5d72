//! Noisy speech emotion recognition from layered ASR hidden states.
//!
//! Per-layer adapters (BiGRU, temporal max pooling, ReLU, layer norm) turn
//! every encoder and decoder hidden-state stack into a fixed vector; a
//! learnable softmax-weighted sum fuses them and a linear softmax head
//! predicts the emotion class.

pub mod nn;
pub mod adapter;
pub mod harness;
pub mod metrics;
pub mod noise;
pub mod seeding;
pub mod repr;
