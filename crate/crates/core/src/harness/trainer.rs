use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::data::Dataset;
use super::HarnessError;
use crate::adapter::{forward, train_step, LayeredRepresentation, Model};
use crate::metrics::{uar, ConfusionMatrix};
use crate::nn::{AdamState, Mode};
use crate::seeding::stream;

/// Index sets of one fold, all pointing into the same dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub fold: usize,
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldPlan {
    /// Fails if any utterance id used for updates or model selection also
    /// appears in the test set.
    pub fn check_leakage(&self, data: &Dataset) -> Result<(), HarnessError> {
        let test: HashSet<&str> = self.test.iter().map(|&i| data.items[i].id.as_str()).collect();
        let leaked: Vec<String> = self
            .train
            .iter()
            .chain(&self.dev)
            .map(|&i| data.items[i].id.as_str())
            .filter(|id| test.contains(id))
            .map(String::from)
            .collect();
        if leaked.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Leakage {
                fold: self.fold,
                ids: leaked,
            })
        }
    }
}

/// Everything that changes while a fold trains.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: Model,
    /// Weights at the best dev UAR so far.
    pub best: Model,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    pub best_dev_uar: f64,
    pub best_epoch: usize,
    /// Epochs since the last dev improvement.
    pub stale: usize,
    pub stopped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_uar: f64,
    pub improved: bool,
}

pub struct Trainer<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a Dataset,
    plan: &'a FoldPlan,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a ExperimentConfig, data: &'a Dataset, plan: &'a FoldPlan) -> Result<Self, HarnessError> {
        plan.check_leakage(data)?;
        if plan.train.is_empty() || plan.dev.is_empty() {
            return Err(HarnessError::Data(format!("fold {} has an empty train or dev set", plan.fold)));
        }
        Ok(Self { cfg, data, plan })
    }

    pub fn init(&self) -> Result<TrainState, HarnessError> {
        let mut rng = stream(self.cfg.seed, "init", &[self.plan.fold as u64]);
        let model = Model::new(&self.cfg.stack_config(), self.data.class_names.clone(), &mut rng)?;
        let adam = AdamState::new(&model, self.cfg.adam_config());
        Ok(TrainState {
            best: model.clone(),
            model,
            adam,
            epoch: 0,
            best_dev_uar: f64::NEG_INFINITY,
            best_epoch: 0,
            stale: 0,
            stopped: false,
        })
    }

    /// One pass over the training set followed by dev evaluation. The shuffle
    /// and dropout streams are named by `(fold, epoch)`, so an epoch does not
    /// depend on how earlier epochs consumed randomness.
    pub fn run_epoch(&self, st: &mut TrainState) -> Result<EpochLog, HarnessError> {
        let fold = self.plan.fold as u64;
        let epoch = st.epoch as u64;
        let mut order = self.plan.train.clone();
        order.shuffle(&mut stream(self.cfg.seed, "shuffle", &[fold, epoch]));
        let mut dropout = stream(self.cfg.seed, "dropout", &[fold, epoch]);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(self.cfg.batch_size).enumerate() {
            let batch: Vec<(&LayeredRepresentation, usize)> =
                chunk.iter().map(|&i| (&self.data.items[i].rep, self.data.items[i].label)).collect();
            let loss = train_step(&batch, &mut st.model, &mut st.adam, &mut dropout)?;
            if !loss.is_finite() {
                return Err(HarnessError::NonFinite {
                    fold: self.plan.fold,
                    epoch: st.epoch,
                    batch: b,
                    loss,
                });
            }
            total += loss * chunk.len() as f64;
        }
        let dev = evaluate(&st.model, self.data, &self.plan.dev)?;
        let dev_uar = uar(&dev)?;
        st.epoch += 1;
        let improved = dev_uar > st.best_dev_uar;
        if improved {
            st.best = st.model.clone();
            st.best_dev_uar = dev_uar;
            st.best_epoch = st.epoch;
            st.stale = 0;
        } else {
            st.stale += 1;
            if self.cfg.patience > 0 && st.stale >= self.cfg.patience {
                st.stopped = true;
            }
        }
        if st.epoch >= self.cfg.max_epochs {
            st.stopped = true;
        }
        Ok(EpochLog {
            epoch: st.epoch,
            train_loss: total / order.len() as f64,
            dev_uar,
            improved,
        })
    }

    /// Trains until early stopping, `max_epochs`, or `until` completed epochs.
    pub fn run(&self, st: &mut TrainState, until: usize) -> Result<Vec<EpochLog>, HarnessError> {
        let mut logs = Vec::new();
        while !st.stopped && st.epoch < until {
            logs.push(self.run_epoch(st)?);
        }
        Ok(logs)
    }
}

/// Predicted class of each indexed utterance (eval mode, argmax, ties to the
/// lower index).
pub fn predict(model: &Model, data: &Dataset, indices: &[usize]) -> Result<Vec<usize>, HarnessError> {
    indices
        .par_iter()
        .map(|&i| {
            let mut unused = ChaCha8Rng::seed_from_u64(0);
            let p = forward(&data.items[i].rep, &model.stack, &model.classifier, Mode::Eval, &mut unused)?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(HarnessError::Data(format!("non-finite output for {}", data.items[i].id)));
            }
            let best = p
                .iter()
                .enumerate()
                .fold(0, |b, (k, &v)| if v > p[b] { k } else { b });
            Ok(best)
        })
        .collect()
}

pub fn evaluate(model: &Model, data: &Dataset, indices: &[usize]) -> Result<ConfusionMatrix, HarnessError> {
    let pred = predict(model, data, indices)?;
    let truth: Vec<usize> = indices.iter().map(|&i| data.items[i].label).collect();
    Ok(ConfusionMatrix::from_predictions(data.class_names.clone(), &truth, &pred)?)
}
