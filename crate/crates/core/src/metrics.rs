//! UAR, F1, WER and confusion matrices, plus the line-oriented report format.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("classes with zero support: {0:?}")]
    ZeroSupport(Vec<String>),
    #[error("empty reference transcript")]
    EmptyReference,
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
}

/// Counts indexed `[true class][predicted class]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        Self {
            class_names,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn from_counts(class_names: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        assert_eq!(counts.len(), class_names.len());
        assert!(counts.iter().all(|r| r.len() == class_names.len()));
        Self { class_names, counts }
    }

    pub fn from_predictions(class_names: Vec<String>, truth: &[usize], predicted: &[usize]) -> Result<Self, MetricError> {
        let mut cm = Self::new(class_names);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<(), MetricError> {
        let classes = self.num_classes();
        for index in [truth, predicted] {
            if index >= classes {
                return Err(MetricError::ClassOutOfRange { index, classes });
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted_count(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.num_classes()).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.total() as f64
    }

    fn check_support(&self) -> Result<(), MetricError> {
        let missing: Vec<String> = (0..self.num_classes())
            .filter(|&c| self.support(c) == 0)
            .map(|c| self.class_names[c].clone())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(MetricError::ZeroSupport(missing))
        }
    }

    pub fn recall(&self, class: usize) -> f64 {
        self.counts[class][class] as f64 / self.support(class) as f64
    }

    /// Defined as 0 when nothing was predicted as `class`.
    pub fn precision(&self, class: usize) -> f64 {
        let predicted = self.predicted_count(class);
        if predicted == 0 {
            0.0
        } else {
            self.counts[class][class] as f64 / predicted as f64
        }
    }

    pub fn f1_of(&self, class: usize) -> f64 {
        let p = self.precision(class);
        let r = self.recall(class);
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Unweighted average recall: the mean of per-class recalls.
pub fn uar(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    cm.check_support()?;
    let c = cm.num_classes();
    Ok((0..c).map(|k| cm.recall(k)).sum::<f64>() / c as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum F1Averaging {
    Macro,
    Weighted,
}

pub fn f1(cm: &ConfusionMatrix, averaging: F1Averaging) -> Result<f64, MetricError> {
    cm.check_support()?;
    let c = cm.num_classes();
    Ok(match averaging {
        F1Averaging::Macro => (0..c).map(|k| cm.f1_of(k)).sum::<f64>() / c as f64,
        F1Averaging::Weighted => {
            let total = cm.total() as f64;
            (0..c).map(|k| cm.f1_of(k) * cm.support(k) as f64 / total).sum()
        }
    })
}

/// Whitespace-split tokens after lowercasing and punctuation stripping.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TokenSequence(pub Vec<String>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Characters other than alphanumerics kept by [`normalize_tokens`].
pub const DEFAULT_KEEP: &[char] = &['\''];

pub fn normalize_tokens(text: &str) -> TokenSequence {
    normalize_tokens_keeping(text, DEFAULT_KEEP)
}

/// Lowercases, replaces every character that is neither alphanumeric,
/// whitespace, nor in `keep` by a space, then splits on whitespace.
pub fn normalize_tokens_keeping(text: &str, keep: &[char]) -> TokenSequence {
    let cleaned: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() || keep.contains(&c) {
                c
            } else {
                ' '
            }
        })
        .collect();
    TokenSequence(cleaned.split_whitespace().map(str::to_string).collect())
}

/// Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// `(S + D + I) / |ref|`.
pub fn wer(reference: &TokenSequence, hypothesis: &TokenSequence) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    Ok(edit_distance(&reference.0, &hypothesis.0) as f64 / reference.len() as f64)
}

/// Summary scores for one evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Scores {
    pub uar: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub accuracy: f64,
}

impl Scores {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self, MetricError> {
        Ok(Self {
            uar: uar(cm)?,
            f1_macro: f1(cm, F1Averaging::Macro)?,
            f1_weighted: f1(cm, F1Averaging::Weighted)?,
            accuracy: cm.accuracy(),
        })
    }
}

pub fn format_value(v: f64) -> String {
    format!("{v:.6}")
}

/// Writes one `metric<TAB>value` block followed by the confusion matrix.
///
/// ```text
/// uar\t0.750000
/// f1_macro\t...
/// f1_weighted\t...
/// accuracy\t...
/// confusion\t<class>\t<class>...
/// <class>\t<count>\t<count>...
/// ```
pub fn write_report_block(out: &mut String, scores: &Scores, cm: &ConfusionMatrix) {
    let _ = writeln!(out, "uar\t{}", format_value(scores.uar));
    let _ = writeln!(out, "f1_macro\t{}", format_value(scores.f1_macro));
    let _ = writeln!(out, "f1_weighted\t{}", format_value(scores.f1_weighted));
    let _ = writeln!(out, "accuracy\t{}", format_value(scores.accuracy));
    let _ = writeln!(out, "confusion\t{}", cm.class_names().join("\t"));
    for (name, row) in cm.class_names().iter().zip(cm.counts()) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "{name}\t{}", cells.join("\t"));
    }
}
