use rayon::prelude::*;

use super::manifest::{Manifest, Split};
use super::HarnessError;
use crate::adapter::LayeredRepresentation;
use crate::repr::{read_lrf, SyntheticCorpus};

/// One loaded, labelled utterance.
#[derive(Clone, Debug)]
pub struct Utterance {
    pub id: String,
    pub rep: LayeredRepresentation,
    pub label: usize,
    pub fold: Option<usize>,
    pub snr_db: Option<f64>,
    pub split: Option<Split>,
}

/// Utterances in manifest order plus the class list their labels index into.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub items: Vec<Utterance>,
}

impl Dataset {
    /// Reads every LRF file of `manifest`. `classes` fixes the label order;
    /// when empty the sorted distinct manifest labels are used.
    pub fn load(manifest: &Manifest, classes: &[String]) -> Result<Self, HarnessError> {
        let class_names = if classes.is_empty() {
            manifest.class_names()
        } else {
            manifest.check_labels(classes)?;
            classes.to_vec()
        };
        let items = manifest
            .rows()
            .par_iter()
            .map(|row| {
                let rep = read_lrf(manifest.resolve(row)).map_err(|source| HarnessError::Lrf {
                    id: row.id.clone(),
                    source,
                })?;
                let label = class_names.iter().position(|c| c == &row.label).expect("labels checked");
                Ok(Utterance {
                    id: row.id.clone(),
                    rep,
                    label,
                    fold: row.fold,
                    snr_db: row.snr_db,
                    split: row.split,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        if items.is_empty() {
            return Err(HarnessError::Data("manifest has no utterances".into()));
        }
        Ok(Self { class_names, items })
    }

    pub fn from_synthetic(corpus: &SyntheticCorpus) -> Self {
        Self {
            class_names: corpus.class_names.clone(),
            items: corpus
                .items
                .iter()
                .map(|(rep, y)| Utterance {
                    id: rep.utterance_id.clone(),
                    rep: rep.clone(),
                    label: *y,
                    fold: None,
                    snr_db: None,
                    split: None,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|u| u.label).collect()
    }

    /// Distinct snr_db values in ascending order.
    pub fn snr_levels(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.items.iter().filter_map(|u| u.snr_db).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}
