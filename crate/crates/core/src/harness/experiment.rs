use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::config::{CvScheme, ExperimentConfig};
use super::data::Dataset;
use super::manifest::{Manifest, Split};
use super::split::{dev_holdout, kfold_indices};
use super::trainer::{evaluate, predict, EpochLog, FoldPlan, TrainState, Trainer};
use super::HarnessError;
use crate::metrics::{format_value, write_report_block, ConfusionMatrix, Scores};

pub const THREADS_ENV: &str = "NSER_THREADS";

/// Worker count requested through `NSER_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `f` on a dedicated pool of `threads` workers (or the global pool).
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, HarnessError> + Send,
) -> Result<T, HarnessError> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Data(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Train/dev/test index sets for every fold of the configured scheme.
pub fn plan_folds(cfg: &ExperimentConfig, data: &Dataset) -> Result<Vec<FoldPlan>, HarnessError> {
    let labels = data.labels();
    match cfg.cv {
        CvScheme::FixedSplit => {
            let by = |s: Split| -> Result<Vec<usize>, HarnessError> {
                let mut out = Vec::new();
                for (i, u) in data.items.iter().enumerate() {
                    match u.split {
                        Some(x) if x == s => out.push(i),
                        Some(_) => {}
                        None => return Err(HarnessError::Data(format!("utterance {} has no split", u.id))),
                    }
                }
                Ok(out)
            };
            let (train, dev, test) = (by(Split::Train)?, by(Split::Dev)?, by(Split::Test)?);
            if train.is_empty() || test.is_empty() {
                return Err(HarnessError::Data("fixed split needs train and test rows".into()));
            }
            let (train, dev) = if dev.is_empty() {
                dev_holdout(&train, &labels, cfg.dev_fraction, cfg.seed, 0)?
            } else {
                (train, dev)
            };
            Ok(vec![FoldPlan {
                fold: 0,
                train,
                dev,
                test,
            }])
        }
        CvScheme::KFold(k) => {
            let tests: Vec<Vec<usize>> = if data.items.iter().all(|u| u.fold.is_some()) {
                let folds: BTreeSet<usize> = data.items.iter().filter_map(|u| u.fold).collect();
                if folds.len() != k {
                    return Err(HarnessError::Data(format!(
                        "manifest assigns {} folds but the config asks for {k}",
                        folds.len()
                    )));
                }
                folds
                    .iter()
                    .map(|f| (0..data.len()).filter(|&i| data.items[i].fold == Some(*f)).collect())
                    .collect()
            } else {
                kfold_indices(&labels, k, cfg.seed)?
            };
            tests
                .into_iter()
                .enumerate()
                .map(|(fold, test)| {
                    let train_all: Vec<usize> = (0..data.len()).filter(|i| test.binary_search(i).is_err()).collect();
                    let (train, dev) = dev_holdout(&train_all, &labels, cfg.dev_fraction, cfg.seed, fold as u64)?;
                    Ok(FoldPlan { fold, train, dev, test })
                })
                .collect()
        }
    }
}

/// Scores on the test utterances sharing one snr_db value.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionScores {
    pub snr_db: f64,
    pub scores: Scores,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub scores: Scores,
    pub confusion: ConfusionMatrix,
    pub conditions: Vec<ConditionScores>,
    pub history: Vec<EpochLog>,
    /// Final state; `state.best` holds the evaluated weights.
    pub state: TrainState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary { mean, std }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub class_names: Vec<String>,
    pub folds: Vec<FoldOutcome>,
}

fn metric_of(s: &Scores, name: &str) -> f64 {
    match name {
        "uar" => s.uar,
        "f1_macro" => s.f1_macro,
        "f1_weighted" => s.f1_weighted,
        "accuracy" => s.accuracy,
        _ => unreachable!("metric names validated with the config"),
    }
}

impl ExperimentReport {
    pub fn aggregate(&self, metric: &str) -> Summary {
        summarize(&self.folds.iter().map(|f| metric_of(&f.scores, metric)).collect::<Vec<_>>())
    }

    /// Aggregate of one metric over the test utterances at `snr_db`.
    pub fn condition_aggregate(&self, snr_db: f64, metric: &str) -> Option<Summary> {
        let values: Vec<f64> = self
            .folds
            .iter()
            .filter_map(|f| f.conditions.iter().find(|c| c.snr_db == snr_db))
            .map(|c| metric_of(&c.scores, metric))
            .collect();
        (!values.is_empty()).then(|| summarize(&values))
    }

    pub fn snr_levels(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.folds.iter().flat_map(|f| f.conditions.iter().map(|c| c.snr_db)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn pooled_confusion(&self) -> ConfusionMatrix {
        let c = self.class_names.len();
        let mut counts = vec![vec![0u64; c]; c];
        for f in &self.folds {
            for (r, row) in f.confusion.counts().iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    counts[r][k] += v;
                }
            }
        }
        ConfusionMatrix::from_counts(self.class_names.clone(), counts)
    }

    /// Line-oriented report: one block per fold, then `aggregate`.
    pub fn render(&self) -> String {
        let keep = |line: &str| {
            let key = line.split('\t').next().unwrap_or("");
            !super::config::METRIC_NAMES.contains(&key) || self.config.metrics.iter().any(|m| m == key)
        };
        let mut out = String::new();
        let _ = writeln!(out, "experiment\t{}", self.config.name());
        let _ = writeln!(out, "seed\t{}", self.config.seed);
        for f in &self.folds {
            let _ = writeln!(out, "\nfold\t{}", f.fold);
            let _ = writeln!(out, "epochs\t{}", f.state.epoch);
            let _ = writeln!(out, "best_epoch\t{}", f.state.best_epoch);
            let _ = writeln!(out, "best_dev_uar\t{}", format_value(f.state.best_dev_uar));
            let mut block = String::new();
            write_report_block(&mut block, &f.scores, &f.confusion);
            block.lines().filter(|l| keep(l)).for_each(|l| {
                out.push_str(l);
                out.push('\n');
            });
            for c in &f.conditions {
                for m in &self.config.metrics {
                    let _ = writeln!(out, "{m}@snr{}\t{}", c.snr_db, format_value(metric_of(&c.scores, m)));
                }
            }
        }
        let _ = writeln!(out, "\naggregate\t{} folds", self.folds.len());
        for m in &self.config.metrics {
            let s = self.aggregate(m);
            let _ = writeln!(out, "{m}_mean\t{}", format_value(s.mean));
            let _ = writeln!(out, "{m}_std\t{}", format_value(s.std));
        }
        for snr in self.snr_levels() {
            for m in &self.config.metrics {
                if let Some(s) = self.condition_aggregate(snr, m) {
                    let _ = writeln!(out, "{m}@snr{snr}_mean\t{}", format_value(s.mean));
                }
            }
        }
        let pooled = self.pooled_confusion();
        let _ = writeln!(out, "confusion\t{}", pooled.class_names().join("\t"));
        for (name, row) in pooled.class_names().iter().zip(pooled.counts()) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{name}\t{}", cells.join("\t"));
        }
        out
    }
}

fn condition_scores(data: &Dataset, plan: &FoldPlan, pred: &[usize]) -> Result<Vec<ConditionScores>, HarnessError> {
    let mut levels: Vec<f64> = plan.test.iter().filter_map(|&i| data.items[i].snr_db).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
        .into_iter()
        .map(|snr| {
            let (truth, p): (Vec<usize>, Vec<usize>) = plan
                .test
                .iter()
                .zip(pred)
                .filter(|(&i, _)| data.items[i].snr_db == Some(snr))
                .map(|(&i, &p)| (data.items[i].label, p))
                .unzip();
            let cm = ConfusionMatrix::from_predictions(data.class_names.clone(), &truth, &p)?;
            Ok(ConditionScores {
                snr_db: snr,
                scores: Scores::from_confusion(&cm)?,
            })
        })
        .collect()
}

/// Finishes a fold from its trained state: evaluates the best weights on test.
pub fn finish_fold(
    data: &Dataset,
    plan: &FoldPlan,
    state: TrainState,
    history: Vec<EpochLog>,
) -> Result<FoldOutcome, HarnessError> {
    plan.check_leakage(data)?;
    let pred = predict(&state.best, data, &plan.test)?;
    let truth: Vec<usize> = plan.test.iter().map(|&i| data.items[i].label).collect();
    let confusion = ConfusionMatrix::from_predictions(data.class_names.clone(), &truth, &pred)?;
    Ok(FoldOutcome {
        fold: plan.fold,
        scores: Scores::from_confusion(&confusion)?,
        conditions: condition_scores(data, plan, &pred)?,
        confusion,
        history,
        state,
    })
}

/// Trains and evaluates every fold. Deterministic for a given config and
/// dataset, independent of the worker count.
pub fn run_experiment(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentReport, HarnessError> {
    run_experiment_with(cfg, data, |_, _| {})
}

/// As [`run_experiment`], calling `on_epoch(fold, log)` after every epoch.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(usize, &EpochLog),
) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    if !cfg.classes.is_empty() && cfg.classes != data.class_names {
        return Err(HarnessError::Data(format!(
            "config classes [{}] differ from dataset classes [{}]",
            cfg.classes.join(","),
            data.class_names.join(",")
        )));
    }
    let plans = plan_folds(cfg, data)?;
    let mut folds = Vec::with_capacity(plans.len());
    for plan in &plans {
        let trainer = Trainer::new(cfg, data, plan)?;
        let mut state = trainer.init()?;
        let mut history = Vec::new();
        while !state.stopped {
            let log = trainer.run_epoch(&mut state)?;
            on_epoch(plan.fold, &log);
            history.push(log);
        }
        folds.push(finish_fold(data, plan, state, history)?);
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        class_names: data.class_names.clone(),
        folds,
    })
}

/// Loads a manifest's LRF files and runs the experiment on them.
pub fn run_experiment_on_manifest(cfg: &ExperimentConfig, manifest: &Manifest) -> Result<ExperimentReport, HarnessError> {
    let data = Dataset::load(manifest, &cfg.classes)?;
    run_experiment(cfg, &data)
}

/// Evaluates `model` on `indices` and returns the scores and confusion.
pub fn score(model: &crate::adapter::Model, data: &Dataset, indices: &[usize]) -> Result<(Scores, ConfusionMatrix), HarnessError> {
    let cm = evaluate(model, data, indices)?;
    Ok((Scores::from_confusion(&cm)?, cm))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub uar: Summary,
    pub f1_weighted: Summary,
    pub f1_macro: Summary,
    /// `(snr_db, uar mean, weighted F1 mean)` per condition.
    pub conditions: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub snr_levels: Vec<f64>,
    /// Sorted by mean UAR, best first; ties keep config order.
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn render(&self) -> String {
        let mut out = String::from("variant\tuar\tuar_std\tf1_weighted\tf1_macro");
        for snr in &self.snr_levels {
            let _ = write!(out, "\tuar@snr{snr}\tf1@snr{snr}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.name,
                format_value(r.uar.mean),
                format_value(r.uar.std),
                format_value(r.f1_weighted.mean),
                format_value(r.f1_macro.mean)
            );
            for (_, u, f) in &r.conditions {
                let _ = write!(out, "\t{}\t{}", format_value(*u), format_value(*f));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every config on the same data and tabulates them side by side.
pub fn compare_variants(configs: &[ExperimentConfig], data: &Dataset) -> Result<ComparisonTable, HarnessError> {
    let first = configs
        .first()
        .ok_or_else(|| HarnessError::Mismatch("no configs to compare".into()))?;
    for c in configs {
        if c.classes != first.classes {
            return Err(HarnessError::Mismatch(format!(
                "{} uses classes [{}], {} uses [{}]",
                c.name(),
                c.classes.join(","),
                first.name(),
                first.classes.join(",")
            )));
        }
        if c.seed != first.seed {
            return Err(HarnessError::Mismatch(format!("{} uses seed {}, expected {}", c.name(), c.seed, first.seed)));
        }
    }
    let snr_levels = data.snr_levels();
    let mut rows = Vec::with_capacity(configs.len());
    for c in configs {
        let report = run_experiment(c, data)?;
        let conditions = snr_levels
            .iter()
            .map(|&s| {
                let u = report.condition_aggregate(s, "uar").map_or(f64::NAN, |x| x.mean);
                let f = report.condition_aggregate(s, "f1_weighted").map_or(f64::NAN, |x| x.mean);
                (s, u, f)
            })
            .collect();
        rows.push(ComparisonRow {
            name: c.name(),
            uar: report.aggregate("uar"),
            f1_weighted: report.aggregate("f1_weighted"),
            f1_macro: report.aggregate("f1_macro"),
            conditions,
        });
    }
    rows.sort_by(|a, b| b.uar.mean.total_cmp(&a.uar.mean));
    Ok(ComparisonTable { snr_levels, rows })
}
