use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::adapter::{FusionNorm, RepresentationSource, StackConfig, Variant};
use crate::nn::AdamConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { key: String, line: usize },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    Value { key: String, line: usize, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CvScheme {
    /// Train/dev/test taken from the manifest's split column.
    FixedSplit,
    /// k-fold cross-validation with a stratified dev holdout from each
    /// training portion.
    KFold(usize),
}

pub const METRIC_NAMES: &[&str] = &["uar", "f1_macro", "f1_weighted", "accuracy"];

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub source: RepresentationSource,
    pub variant: Variant,
    pub fusion: FusionNorm,
    pub layers_enc: usize,
    pub layers_dec: usize,
    pub dim: usize,
    pub adapter_hidden: usize,
    pub adapter_layers: usize,
    pub adapter_out: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub cv: CvScheme,
    pub dev_fraction: f64,
    /// Class names in label-index order; empty means "sorted manifest labels".
    pub classes: Vec<String>,
    pub metrics: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: RepresentationSource::EncoderDecoder,
            variant: Variant::Adapter,
            fusion: FusionNorm::Softmax,
            layers_enc: 13,
            layers_dec: 13,
            dim: 768,
            adapter_hidden: 256,
            adapter_layers: 2,
            adapter_out: 512,
            dropout: 0.5,
            lr: 1e-4,
            batch_size: 16,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            cv: CvScheme::KFold(5),
            dev_fraction: 0.1,
            classes: Vec::new(),
            metrics: METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

const KEYS: &[&str] = &[
    "mode",
    "variant",
    "fusion",
    "layers_enc",
    "layers_dec",
    "dim",
    "adapter_hidden",
    "adapter_layers",
    "adapter_out",
    "dropout",
    "lr",
    "batch_size",
    "max_epochs",
    "patience",
    "seed",
    "cv",
    "folds",
    "dev_fraction",
    "classes",
    "metrics",
];

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl ExperimentConfig {
    pub fn stack_config(&self) -> StackConfig {
        StackConfig {
            source: self.source,
            variant: self.variant,
            fusion: self.fusion,
            layers_enc: self.layers_enc,
            layers_dec: self.layers_dec,
            input_dim: self.dim,
            adapter_hidden: self.adapter_hidden,
            adapter_layers: self.adapter_layers,
            dropout: self.dropout,
            ..StackConfig::default()
        }
    }

    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }

    /// Short label such as `encoder+decoder/adapter`.
    pub fn name(&self) -> String {
        format!("{}/{}", self.source, self.variant)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.dim == 0 || self.adapter_hidden == 0 || self.adapter_layers == 0 {
            return bad("dim, adapter_hidden and adapter_layers must be positive".into());
        }
        if self.adapter_out != 2 * self.adapter_hidden {
            return bad(format!(
                "adapter_out {} must equal 2 * adapter_hidden ({})",
                self.adapter_out,
                2 * self.adapter_hidden
            ));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return bad(format!("dev_fraction {} outside (0, 1)", self.dev_fraction));
        }
        if let CvScheme::KFold(k) = self.cv {
            if k < 2 {
                return bad(format!("k-fold needs k >= 2, got {k}"));
            }
        }
        let mut seen = HashSet::new();
        for c in &self.classes {
            if !seen.insert(c) {
                return bad(format!("class `{c}` listed twice"));
            }
        }
        if !self.classes.is_empty() && self.classes.len() < 2 {
            return bad("at least two classes are required".into());
        }
        for m in &self.metrics {
            if !METRIC_NAMES.contains(&m.as_str()) {
                return bad(format!("unknown metric `{m}` (known: {})", METRIC_NAMES.join(", ")));
            }
        }
        self.stack_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let mut folds: Option<usize> = None;
        let mut fixed = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { key: key.into(), line });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey { key: key.into(), line });
            }
            let err = |reason: String| ConfigError::Value {
                key: key.into(),
                line,
                reason,
            };
            fn num<T: FromStr>(v: &str) -> Result<T, String>
            where
                T::Err: fmt::Display,
            {
                v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
            }
            match key {
                "mode" => cfg.source = value.parse().map_err(err)?,
                "variant" => cfg.variant = value.parse().map_err(err)?,
                "fusion" => cfg.fusion = value.parse().map_err(err)?,
                "layers_enc" => cfg.layers_enc = num(value).map_err(err)?,
                "layers_dec" => cfg.layers_dec = num(value).map_err(err)?,
                "dim" => cfg.dim = num(value).map_err(err)?,
                "adapter_hidden" => cfg.adapter_hidden = num(value).map_err(err)?,
                "adapter_layers" => cfg.adapter_layers = num(value).map_err(err)?,
                "adapter_out" => cfg.adapter_out = num(value).map_err(err)?,
                "dropout" => cfg.dropout = num(value).map_err(err)?,
                "lr" => cfg.lr = num(value).map_err(err)?,
                "batch_size" => cfg.batch_size = num(value).map_err(err)?,
                "max_epochs" => cfg.max_epochs = num(value).map_err(err)?,
                "patience" => cfg.patience = num(value).map_err(err)?,
                "seed" => cfg.seed = num(value).map_err(err)?,
                "cv" => match value {
                    "kfold" | "k-fold" => fixed = false,
                    "fixed-split" | "fixed" => fixed = true,
                    other => return Err(err(format!("`{other}` (kfold|fixed-split)"))),
                },
                "folds" => folds = Some(num(value).map_err(err)?),
                "dev_fraction" => cfg.dev_fraction = num(value).map_err(err)?,
                "classes" => cfg.classes = list(value),
                "metrics" => cfg.metrics = list(value),
                _ => unreachable!("key list checked above"),
            }
        }
        if !seen.contains("adapter_out") && seen.contains("adapter_hidden") {
            cfg.adapter_out = 2 * cfg.adapter_hidden;
        }
        cfg.cv = if fixed {
            if folds.is_some() {
                return Err(ConfigError::Invalid("`folds` is only valid with cv = kfold".into()));
            }
            CvScheme::FixedSplit
        } else {
            CvScheme::KFold(folds.unwrap_or(5))
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Canonical `key = value` text; `parse(to_text())` returns `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("mode", self.source.to_string());
        kv("variant", self.variant.to_string());
        kv("fusion", self.fusion.to_string());
        kv("layers_enc", self.layers_enc.to_string());
        kv("layers_dec", self.layers_dec.to_string());
        kv("dim", self.dim.to_string());
        kv("adapter_hidden", self.adapter_hidden.to_string());
        kv("adapter_layers", self.adapter_layers.to_string());
        kv("adapter_out", self.adapter_out.to_string());
        kv("dropout", self.dropout.to_string());
        kv("lr", self.lr.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("max_epochs", self.max_epochs.to_string());
        kv("patience", self.patience.to_string());
        kv("seed", self.seed.to_string());
        match self.cv {
            CvScheme::FixedSplit => kv("cv", "fixed-split".into()),
            CvScheme::KFold(k) => {
                kv("cv", "kfold".into());
                kv("folds", k.to_string());
            }
        }
        kv("dev_fraction", self.dev_fraction.to_string());
        if !self.classes.is_empty() {
            kv("classes", self.classes.join(","));
        }
        kv("metrics", self.metrics.join(","));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_hyperparameters() {
        let c = ExperimentConfig::default();
        assert_eq!((c.adapter_hidden, c.adapter_layers, c.adapter_out), (256, 2, 512));
        assert_eq!((c.layers_enc, c.layers_dec), (13, 13));
        assert_eq!(c.dropout, 0.5);
        assert_eq!(c.lr, 1e-4);
        assert_eq!((c.batch_size, c.max_epochs, c.patience), (16, 100, 10));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn parses_and_round_trips() {
        let text = "# small run\n\
            mode = encoder-only\n\
            variant = mean   # baseline\n\
            layers_enc = 4\n\
            dim = 16\n\
            adapter_hidden = 8\n\
            cv = kfold\n\
            folds = 4\n\
            classes = neu, hap, ang, sad\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.source, RepresentationSource::EncoderOnly);
        assert_eq!(c.variant, Variant::Mean);
        assert_eq!(c.adapter_out, 16);
        assert_eq!(c.cv, CvScheme::KFold(4));
        assert_eq!(c.classes, vec!["neu", "hap", "ang", "sad"]);
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn unknown_key_is_named() {
        match ExperimentConfig::parse("lr = 0.001\nlearning_rate = 3\n") {
            Err(ConfigError::UnknownKey { key, line }) => {
                assert_eq!(key, "learning_rate");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(matches!(
            ExperimentConfig::parse("lr = fast\n"),
            Err(ConfigError::Value { .. })
        ));
        assert!(matches!(ExperimentConfig::parse("lr\n"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(
            ExperimentConfig::parse("seed = 1\nseed = 2\n"),
            Err(ConfigError::DuplicateKey { .. })
        ));
        assert!(ExperimentConfig::parse("folds = 1\n").is_err());
        assert!(ExperimentConfig::parse("adapter_hidden = 8\nadapter_out = 10\n").is_err());
        assert!(ExperimentConfig::parse("dim = 0\n").is_err());
        assert!(ExperimentConfig::parse("cv = fixed-split\nfolds = 3\n").is_err());
        assert!(ExperimentConfig::parse("metrics = uar,auc\n").is_err());
        assert!(ExperimentConfig::parse("mode = decoder-only\nlayers_dec = 0\n").is_err());
    }
}
