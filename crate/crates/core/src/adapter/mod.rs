//! Layer adapters, weighted fusion and the emotion classifier head.
//!
//! Each participating hidden-state stack `H` is reduced to one vector
//! (`layer_norm(relu(maxpool(bigru(H))))` for the adapter variant, or plain
//! temporal max pooling for the `Last`/`Mean` baselines), the vectors are
//! combined with `softmax(fusion_logits)` weights and a linear softmax head
//! yields class probabilities.

mod representation;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::nn::params::{join, Parameters};
use crate::nn::{
    layer_norm, layer_norm_backward, maxpool_backward, maxpool_time, relu, relu_backward, softmax, softmax_cross_entropy,
    BiGruParams, BiGruTrace, LayerNormCache, LinearParams, Matrix, MaxPool, Mode, NnError,
};

pub use representation::LayeredRepresentation;
pub use train::{batch_gradients, train_step};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{side} layer count mismatch: model expects {expected}, representation has {actual}")]
    LayerCount {
        side: Side,
        expected: usize,
        actual: usize,
    },
    #[error("{side} layer {layer}: feature dim {actual}, model expects {expected}")]
    FeatureDim {
        side: Side,
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Encoder,
    Decoder,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Encoder => "encoder",
            Side::Decoder => "decoder",
        })
    }
}

/// Which hidden-state stacks feed the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RepresentationSource {
    EncoderOnly,
    DecoderOnly,
    EncoderDecoder,
}

impl RepresentationSource {
    pub fn uses(self, side: Side) -> bool {
        !matches!(
            (self, side),
            (RepresentationSource::EncoderOnly, Side::Decoder) | (RepresentationSource::DecoderOnly, Side::Encoder)
        )
    }
}

impl FromStr for RepresentationSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "encoder-only" | "encoder" => Ok(Self::EncoderOnly),
            "decoder-only" | "decoder" => Ok(Self::DecoderOnly),
            "encoder+decoder" | "encoder-decoder" => Ok(Self::EncoderDecoder),
            other => Err(format!("unknown representation source `{other}`")),
        }
    }
}

impl fmt::Display for RepresentationSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EncoderOnly => "encoder-only",
            Self::DecoderOnly => "decoder-only",
            Self::EncoderDecoder => "encoder+decoder",
        })
    }
}

/// How the per-layer stacks are reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Final layer of each active side, max-pooled and linearly projected.
    Last,
    /// Unweighted mean of every layer's max-pooled states, linearly projected.
    Mean,
    /// One trainable layer adapter per layer plus learned fusion weights.
    Adapter,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(Self::Last),
            "mean" => Ok(Self::Mean),
            "adapter" => Ok(Self::Adapter),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Last => "last",
            Self::Mean => "mean",
            Self::Adapter => "adapter",
        })
    }
}

/// Normalization of the fusion weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FusionNorm {
    /// `softmax(logits)` over all participating layers.
    Softmax,
    /// Logits used directly as weights (initialized to `1/K`).
    Raw,
}

impl FromStr for FusionNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "softmax" => Ok(Self::Softmax),
            "raw" => Ok(Self::Raw),
            other => Err(format!("unknown fusion normalization `{other}`")),
        }
    }
}

impl fmt::Display for FusionNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Softmax => "softmax",
            Self::Raw => "raw",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackConfig {
    pub source: RepresentationSource,
    pub variant: Variant,
    pub fusion: FusionNorm,
    pub layers_enc: usize,
    pub layers_dec: usize,
    pub input_dim: usize,
    /// Per-direction BiGRU width; the adapter output is twice this.
    pub adapter_hidden: usize,
    pub adapter_layers: usize,
    pub dropout: f64,
    pub layer_norm_eps: f64,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            source: RepresentationSource::EncoderDecoder,
            variant: Variant::Adapter,
            fusion: FusionNorm::Softmax,
            layers_enc: 13,
            layers_dec: 13,
            input_dim: 768,
            adapter_hidden: 256,
            adapter_layers: 2,
            dropout: 0.5,
            layer_norm_eps: 1e-10,
        }
    }
}

impl StackConfig {
    pub fn out_dim(&self) -> usize {
        2 * self.adapter_hidden
    }

    fn layer_count(&self, side: Side) -> usize {
        match side {
            Side::Encoder => self.layers_enc,
            Side::Decoder => self.layers_dec,
        }
    }

    /// Participating `(side, layer)` pairs in fusion order.
    pub fn participants(&self) -> Vec<(Side, usize)> {
        let mut out = Vec::new();
        for side in [Side::Encoder, Side::Decoder] {
            if !self.source.uses(side) {
                continue;
            }
            let n = self.layer_count(side);
            match self.variant {
                Variant::Last => out.push((side, n - 1)),
                Variant::Mean | Variant::Adapter => out.extend((0..n).map(|l| (side, l))),
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_dim == 0 || self.adapter_hidden == 0 || self.adapter_layers == 0 {
            return Err(ModelError::Config("dimensions must be positive".into()));
        }
        for side in [Side::Encoder, Side::Decoder] {
            if self.source.uses(side) && self.layer_count(side) == 0 {
                return Err(ModelError::Config(format!(
                    "{} mode needs at least one {side} layer",
                    self.source
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1]", self.dropout)));
        }
        if self.layer_norm_eps.is_nan() || self.layer_norm_eps <= 0.0 {
            return Err(ModelError::Config("layer_norm_eps must be positive".into()));
        }
        Ok(())
    }
}

/// BiGRU followed by temporal max pooling, ReLU and layer normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerAdapter {
    pub gru: BiGruParams,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
}

impl LayerAdapter {
    pub fn init<R: Rng + ?Sized>(cfg: &StackConfig, rng: &mut R) -> Self {
        let out = cfg.out_dim();
        Self {
            gru: BiGruParams::init(cfg.input_dim, cfg.adapter_hidden, cfg.adapter_layers, cfg.dropout, rng),
            gamma: vec![1.0; out],
            beta: vec![0.0; out],
            eps: cfg.layer_norm_eps,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.gru.output_dim()
    }
}

impl Parameters for LayerAdapter {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64])) {
        self.gru.visit(&join(prefix, "gru"), f);
        f(join(prefix, "gamma"), &self.gamma);
        f(join(prefix, "beta"), &self.beta);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64])) {
        self.gru.visit_mut(&join(prefix, "gru"), f);
        f(join(prefix, "gamma"), &mut self.gamma);
        f(join(prefix, "beta"), &mut self.beta);
    }
}

struct AdapterTrace {
    gru: BiGruTrace,
    gru_out: Matrix,
    pool: MaxPool,
    norm: LayerNormCache,
}

fn adapt_traced<R: Rng + ?Sized>(
    h: &Matrix,
    adapter: &LayerAdapter,
    mode: Mode,
    rng: &mut R,
) -> Result<(Vec<f64>, AdapterTrace), NnError> {
    let (gru_out, gru) = adapter.gru.forward_traced(h, mode, rng)?;
    let pool = maxpool_time(&gru_out)?;
    let act = relu(&pool.values);
    let (y, norm) = layer_norm(&act, &adapter.gamma, &adapter.beta, adapter.eps)?;
    Ok((
        y,
        AdapterTrace {
            gru,
            gru_out,
            pool,
            norm,
        },
    ))
}

fn adapt_backward(h: &Matrix, adapter: &LayerAdapter, trace: &AdapterTrace, d_out: &[f64], grads: &mut LayerAdapter) {
    let d_act = layer_norm_backward(&trace.norm, &adapter.gamma, d_out, &mut grads.gamma, &mut grads.beta);
    let d_pool = relu_backward(&trace.pool.values, &d_act);
    let d_seq = maxpool_backward(&trace.pool, &d_pool);
    debug_assert_eq!(d_seq.shape(), trace.gru_out.shape());
    adapter.gru.backward(h, &trace.gru, &d_seq, &mut grads.gru);
}

/// Reduces one hidden-state stack `H` (T×d) to a fixed vector.
pub fn adapt_layer<R: Rng + ?Sized>(h: &Matrix, adapter: &LayerAdapter, mode: Mode, rng: &mut R) -> Result<Vec<f64>, NnError> {
    adapt_traced(h, adapter, mode, rng).map(|(y, _)| y)
}

/// Effective fusion weights for the given logits.
pub fn fusion_weights(logits: &[f64], norm: FusionNorm) -> Vec<f64> {
    match norm {
        FusionNorm::Softmax => softmax(logits),
        FusionNorm::Raw => logits.to_vec(),
    }
}

/// `h* = Σ_k w_k · adapted[k]` with `w = softmax(fusion_logits)`.
pub fn fuse(adapted: &[Vec<f64>], fusion_logits: &[f64]) -> Result<Vec<f64>, ModelError> {
    fuse_with(adapted, fusion_logits, FusionNorm::Softmax)
}

pub fn fuse_with(adapted: &[Vec<f64>], fusion_logits: &[f64], norm: FusionNorm) -> Result<Vec<f64>, ModelError> {
    combine(adapted, &fusion_weights(fusion_logits, norm))
}

fn combine(adapted: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>, ModelError> {
    if adapted.is_empty() || adapted.len() != weights.len() {
        return Err(NnError::Dimension {
            op: "fuse",
            expected: format!("{} adapted vectors (one per fusion logit, at least one)", weights.len()),
            actual: format!("{}", adapted.len()),
        }
        .into());
    }
    let dim = adapted[0].len();
    if let Some(bad) = adapted.iter().find(|v| v.len() != dim) {
        return Err(NnError::Dimension {
            op: "fuse",
            expected: format!("vectors of length {dim}"),
            actual: format!("length {}", bad.len()),
        }
        .into());
    }
    let mut out = vec![0.0; dim];
    for (wk, a) in weights.iter().zip(adapted) {
        for (o, v) in out.iter_mut().zip(a) {
            *o += wk * v;
        }
    }
    Ok(out)
}

/// All adapter and fusion parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdapterStack {
    pub config: StackConfig,
    pub encoder_adapters: Vec<LayerAdapter>,
    pub decoder_adapters: Vec<LayerAdapter>,
    pub fusion_logits: Vec<f64>,
    /// Shared projection `d -> out_dim` used by the `Last` and `Mean` variants.
    pub projection: Option<LinearParams>,
}

impl AdapterStack {
    pub fn out_dim(&self) -> usize {
        self.config.out_dim()
    }

    pub fn fusion_trainable(&self) -> bool {
        self.config.variant == Variant::Adapter
    }

    /// Effective fusion weights. The `Last`/`Mean` baselines keep their
    /// logits frozen and always average uniformly.
    pub fn weights(&self) -> Vec<f64> {
        if self.fusion_trainable() {
            fusion_weights(&self.fusion_logits, self.config.fusion)
        } else {
            let k = self.fusion_logits.len();
            vec![1.0 / k as f64; k]
        }
    }

    fn adapter(&self, side: Side, layer: usize) -> &LayerAdapter {
        match side {
            Side::Encoder => &self.encoder_adapters[layer],
            Side::Decoder => &self.decoder_adapters[layer],
        }
    }

    fn adapter_mut(&mut self, side: Side, layer: usize) -> &mut LayerAdapter {
        match side {
            Side::Encoder => &mut self.encoder_adapters[layer],
            Side::Decoder => &mut self.decoder_adapters[layer],
        }
    }

    /// Checks that `rep` carries what this stack reads. Inactive sides are
    /// never inspected.
    pub fn check_representation(&self, rep: &LayeredRepresentation) -> Result<(), ModelError> {
        let cfg = &self.config;
        for side in [Side::Encoder, Side::Decoder] {
            if !cfg.source.uses(side) {
                continue;
            }
            let layers = rep.layers(side);
            let expected = cfg.layer_count(side);
            if layers.len() != expected {
                return Err(ModelError::LayerCount {
                    side,
                    expected,
                    actual: layers.len(),
                });
            }
            for (l, m) in layers.iter().enumerate() {
                if m.cols() != cfg.input_dim {
                    return Err(ModelError::FeatureDim {
                        side,
                        layer: l,
                        expected: cfg.input_dim,
                        actual: m.cols(),
                    });
                }
                if m.rows() == 0 {
                    return Err(NnError::EmptySequence { op: "forward" }.into());
                }
            }
        }
        Ok(())
    }
}

impl Parameters for AdapterStack {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64])) {
        for (l, a) in self.encoder_adapters.iter().enumerate() {
            a.visit(&join(prefix, &format!("enc{l}")), f);
        }
        for (l, a) in self.decoder_adapters.iter().enumerate() {
            a.visit(&join(prefix, &format!("dec{l}")), f);
        }
        f(join(prefix, "fusion_logits"), &self.fusion_logits);
        if let Some(p) = &self.projection {
            p.visit(&join(prefix, "projection"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64])) {
        for (l, a) in self.encoder_adapters.iter_mut().enumerate() {
            a.visit_mut(&join(prefix, &format!("enc{l}")), f);
        }
        for (l, a) in self.decoder_adapters.iter_mut().enumerate() {
            a.visit_mut(&join(prefix, &format!("dec{l}")), f);
        }
        f(join(prefix, "fusion_logits"), &mut self.fusion_logits);
        if let Some(p) = &mut self.projection {
            p.visit_mut(&join(prefix, "projection"), f);
        }
    }
}

/// Builds a freshly initialized stack for `cfg`.
pub fn configure<R: Rng + ?Sized>(cfg: &StackConfig, rng: &mut R) -> Result<AdapterStack, ModelError> {
    cfg.validate()?;
    let participants = cfg.participants();
    let (encoder_adapters, decoder_adapters, projection) = match cfg.variant {
        Variant::Adapter => {
            let enc_n = if cfg.source.uses(Side::Encoder) { cfg.layers_enc } else { 0 };
            let dec_n = if cfg.source.uses(Side::Decoder) { cfg.layers_dec } else { 0 };
            let enc = (0..enc_n).map(|_| LayerAdapter::init(cfg, rng)).collect();
            let dec = (0..dec_n).map(|_| LayerAdapter::init(cfg, rng)).collect();
            (enc, dec, None)
        }
        Variant::Last | Variant::Mean => (
            Vec::new(),
            Vec::new(),
            Some(LinearParams::init(cfg.input_dim, cfg.out_dim(), rng)),
        ),
    };
    let k = participants.len();
    let fusion_logits = match cfg.fusion {
        FusionNorm::Softmax => vec![0.0; k],
        FusionNorm::Raw => vec![1.0 / k as f64; k],
    };
    Ok(AdapterStack {
        config: cfg.clone(),
        encoder_adapters,
        decoder_adapters,
        fusion_logits,
        projection,
    })
}

/// Final fully connected layer over the fused vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EmotionClassifierParams {
    pub fc: LinearParams,
    pub class_names: Vec<String>,
}

impl EmotionClassifierParams {
    pub fn init<R: Rng + ?Sized>(input_dim: usize, class_names: Vec<String>, rng: &mut R) -> Result<Self, ModelError> {
        if class_names.len() < 2 {
            return Err(ModelError::Config(format!(
                "need at least 2 classes, got {}",
                class_names.len()
            )));
        }
        Ok(Self {
            fc: LinearParams::init(input_dim, class_names.len(), rng),
            class_names,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

impl Parameters for EmotionClassifierParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64])) {
        self.fc.visit(&join(prefix, "fc"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64])) {
        self.fc.visit_mut(&join(prefix, "fc"), f);
    }
}

/// Adapter stack plus classifier; also used as the gradient container.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub stack: AdapterStack,
    pub classifier: EmotionClassifierParams,
}

impl Model {
    pub fn new<R: Rng + ?Sized>(cfg: &StackConfig, class_names: Vec<String>, rng: &mut R) -> Result<Self, ModelError> {
        let stack = configure(cfg, rng)?;
        let classifier = EmotionClassifierParams::init(stack.out_dim(), class_names, rng)?;
        Ok(Self { stack, classifier })
    }

    pub fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        crate::nn::params::fill(&mut g, 0.0);
        g
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.num_classes()
    }
}

impl Parameters for Model {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64])) {
        self.stack.visit(&join(prefix, "stack"), f);
        self.classifier.visit(&join(prefix, "classifier"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64])) {
        self.stack.visit_mut(&join(prefix, "stack"), f);
        self.classifier.visit_mut(&join(prefix, "classifier"), f);
    }
}

enum Reduced {
    Adapter(AdapterTrace),
    Pooled,
}

struct ForwardTrace {
    reduced: Vec<Reduced>,
    features: Vec<Vec<f64>>,
    fused: Vec<f64>,
    projected: Option<Vec<f64>>,
}

fn forward_traced<R: Rng + ?Sized>(
    rep: &LayeredRepresentation,
    stack: &AdapterStack,
    clf: &EmotionClassifierParams,
    mode: Mode,
    rng: &mut R,
) -> Result<(Vec<f64>, ForwardTrace), ModelError> {
    stack.check_representation(rep)?;
    let participants = stack.config.participants();
    if participants.len() != stack.fusion_logits.len() {
        return Err(ModelError::Config(format!(
            "{} fusion logits for {} participating layers",
            stack.fusion_logits.len(),
            participants.len()
        )));
    }
    let mut reduced = Vec::with_capacity(participants.len());
    let mut features = Vec::with_capacity(participants.len());
    for &(side, l) in &participants {
        let h = &rep.layers(side)[l];
        match stack.config.variant {
            Variant::Adapter => {
                let (y, trace) = adapt_traced(h, stack.adapter(side, l), mode, rng)?;
                features.push(y);
                reduced.push(Reduced::Adapter(trace));
            }
            Variant::Last | Variant::Mean => {
                features.push(maxpool_time(h)?.values);
                reduced.push(Reduced::Pooled);
            }
        }
    }
    let fused = combine(&features, &stack.weights())?;
    let projected = match &stack.projection {
        Some(p) => Some(p.apply(&fused)?),
        None => None,
    };
    let logits = clf.fc.apply(projected.as_ref().unwrap_or(&fused))?;
    Ok((
        logits,
        ForwardTrace {
            reduced,
            features,
            fused,
            projected,
        },
    ))
}

/// Class probabilities `softmax(FC(h*))` for one utterance.
pub fn forward<R: Rng + ?Sized>(
    rep: &LayeredRepresentation,
    stack: &AdapterStack,
    clf: &EmotionClassifierParams,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<f64>, ModelError> {
    forward_traced(rep, stack, clf, mode, rng).map(|(logits, _)| softmax(&logits))
}

/// Cross-entropy loss for one labelled utterance; gradients are accumulated
/// into `grads`.
pub fn loss_and_gradients<R: Rng + ?Sized>(
    rep: &LayeredRepresentation,
    label: usize,
    model: &Model,
    grads: &mut Model,
    mode: Mode,
    rng: &mut R,
) -> Result<f64, ModelError> {
    let classes = model.num_classes();
    if label >= classes {
        return Err(ModelError::LabelOutOfRange { label, classes });
    }
    let (logits, trace) = forward_traced(rep, &model.stack, &model.classifier, mode, rng)?;
    let (loss, d_logits) = softmax_cross_entropy(&logits, label)?;

    let head_in = trace.projected.as_ref().unwrap_or(&trace.fused);
    let d_head_in = model.classifier.fc.backward(head_in, &d_logits, &mut grads.classifier.fc);
    let d_fused = match (&model.stack.projection, &mut grads.stack.projection) {
        (Some(p), Some(gp)) => p.backward(&trace.fused, &d_head_in, gp),
        _ => d_head_in,
    };

    let stack = &model.stack;
    let weights = stack.weights();
    if stack.fusion_trainable() {
        let d_w: Vec<f64> = trace
            .features
            .iter()
            .map(|a| a.iter().zip(&d_fused).map(|(x, g)| x * g).sum())
            .collect();
        let d_logit: Vec<f64> = match stack.config.fusion {
            FusionNorm::Softmax => {
                let inner: f64 = weights.iter().zip(&d_w).map(|(w, d)| w * d).sum();
                weights.iter().zip(&d_w).map(|(w, d)| w * (d - inner)).collect()
            }
            FusionNorm::Raw => d_w,
        };
        for (g, d) in grads.stack.fusion_logits.iter_mut().zip(d_logit) {
            *g += d;
        }
    }

    let participants = stack.config.participants();
    for (k, (&(side, l), reduced)) in participants.iter().zip(&trace.reduced).enumerate() {
        let d_feat: Vec<f64> = d_fused.iter().map(|g| weights[k] * g).collect();
        if let Reduced::Adapter(at) = reduced {
            let h = &rep.layers(side)[l];
            adapt_backward(h, stack.adapter(side, l), at, &d_feat, grads.stack.adapter_mut(side, l));
        }
        // pooled baselines have no parameters below the projection
    }
    Ok(loss)
}
