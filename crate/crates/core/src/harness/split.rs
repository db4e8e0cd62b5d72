use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use thiserror::Error;

use super::manifest::Manifest;
use crate::seeding::stream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("k-fold needs k >= 2, got {0}")]
    TooFewFolds(usize),
    #[error("cannot split {items} items into {k} folds")]
    TooFewItems { items: usize, k: usize },
    #[error("cannot hold out a dev set from {0} training items")]
    NoDev(usize),
}

/// Train/test ids of one fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

fn partition(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    (0..k).map(|i| items[i * n / k..(i + 1) * n / k].to_vec()).collect()
}

/// Test-index sets of a seeded k-fold split over items with the given labels.
///
/// When every label occurs at least `k` times, each label's items are
/// shuffled and dealt contiguously so every fold gets `n_c / k` (+-1) of them.
/// Otherwise all items are shuffled together and cut into `k` runs.
pub fn kfold_indices<L: Ord>(labels: &[L], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, SplitError> {
    if k < 2 {
        return Err(SplitError::TooFewFolds(k));
    }
    if labels.len() < k {
        return Err(SplitError::TooFewItems { items: labels.len(), k });
    }
    let mut rng = stream(seed, "kfold", &[k as u64]);
    let mut by_class: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut folds = vec![Vec::new(); k];
    if by_class.values().all(|v| v.len() >= k) {
        for members in by_class.values_mut() {
            members.shuffle(&mut rng);
            for (fold, part) in folds.iter_mut().zip(partition(members, k)) {
                fold.extend(part);
            }
        }
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        folds = partition(&all, k);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Seeded k-fold split of a manifest's utterance ids.
pub fn kfold_split(manifest: &Manifest, k: usize, seed: u64) -> Result<Vec<Fold>, SplitError> {
    let labels: Vec<&str> = manifest.rows().iter().map(|r| r.label.as_str()).collect();
    let tests = kfold_indices(&labels, k, seed)?;
    Ok(tests
        .iter()
        .map(|test| {
            let mut in_test = vec![false; labels.len()];
            test.iter().for_each(|&i| in_test[i] = true);
            let ids = |want: bool| {
                manifest
                    .rows()
                    .iter()
                    .zip(&in_test)
                    .filter(|(_, &t)| t == want)
                    .map(|(r, _)| r.id.clone())
                    .collect()
            };
            Fold {
                train: ids(false),
                test: ids(true),
            }
        })
        .collect())
}

/// Splits `train` (indices into `labels`) into a reduced training set and a
/// dev set holding about `fraction` of each label, at least one per label
/// with two or more members.
pub fn dev_holdout<L: Ord>(
    train: &[usize],
    labels: &[L],
    fraction: f64,
    seed: u64,
    fold: u64,
) -> Result<(Vec<usize>, Vec<usize>), SplitError> {
    let mut rng = stream(seed, "dev", &[fold]);
    let mut by_class: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for &i in train {
        by_class.entry(&labels[i]).or_default().push(i);
    }
    let mut dev = Vec::new();
    for members in by_class.values_mut() {
        if members.len() < 2 {
            continue;
        }
        members.shuffle(&mut rng);
        let take = ((members.len() as f64 * fraction).round() as usize).clamp(1, members.len() - 1);
        dev.extend_from_slice(&members[..take]);
    }
    if dev.is_empty() {
        return Err(SplitError::NoDev(train.len()));
    }
    dev.sort_unstable();
    let rest = train.iter().copied().filter(|i| dev.binary_search(i).is_err()).collect();
    Ok((rest, dev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::manifest::ManifestRow;
    use std::collections::HashSet;

    fn manifest(per_class: usize, classes: usize) -> Manifest {
        let rows = (0..per_class * classes)
            .map(|i| ManifestRow::new(format!("u{i:04}"), format!("u{i}.lrf"), format!("c{}", i % classes)))
            .collect();
        Manifest::from_rows(rows, "").unwrap()
    }

    #[test]
    fn folds_partition_the_ids() {
        for (per_class, classes, k) in [(100, 4, 5), (3, 4, 5), (7, 3, 2), (1, 10, 3)] {
            let m = manifest(per_class, classes);
            let folds = kfold_split(&m, k, 42).unwrap();
            assert_eq!(folds.len(), k);
            let mut seen = HashSet::new();
            for f in &folds {
                for id in &f.test {
                    assert!(seen.insert(id.clone()), "{id} in two test folds");
                }
                assert_eq!(f.train.len() + f.test.len(), m.len());
                let train: HashSet<_> = f.train.iter().collect();
                assert!(f.test.iter().all(|id| !train.contains(id)));
            }
            assert_eq!(seen.len(), m.len());
        }
    }

    #[test]
    fn stratified_counts_per_fold() {
        let m = manifest(100, 4);
        for f in kfold_split(&m, 5, 7).unwrap() {
            assert_eq!(f.test.len(), 80);
            for c in 0..4 {
                let label = format!("c{c}");
                let n = f
                    .test
                    .iter()
                    .filter(|id| m.rows().iter().find(|r| &&r.id == id).unwrap().label == label)
                    .count();
                assert_eq!(n, 20);
            }
        }
    }

    #[test]
    fn seeded_and_deterministic() {
        let m = manifest(20, 3);
        assert_eq!(kfold_split(&m, 4, 1).unwrap(), kfold_split(&m, 4, 1).unwrap());
        assert_ne!(kfold_split(&m, 4, 1).unwrap(), kfold_split(&m, 4, 2).unwrap());
    }

    #[test]
    fn errors() {
        let m = manifest(1, 3);
        assert_eq!(kfold_split(&m, 4, 0), Err(SplitError::TooFewItems { items: 3, k: 4 }));
        assert_eq!(kfold_split(&m, 1, 0), Err(SplitError::TooFewFolds(1)));
    }

    #[test]
    fn dev_holdout_is_stratified_and_disjoint() {
        let labels: Vec<usize> = (0..400).map(|i| i % 4).collect();
        let train: Vec<usize> = (0..320).collect();
        let (rest, dev) = dev_holdout(&train, &labels, 0.1, 3, 0).unwrap();
        assert_eq!(dev.len(), 32);
        for c in 0..4 {
            assert_eq!(dev.iter().filter(|&&i| labels[i] == c).count(), 8);
        }
        assert_eq!(rest.len() + dev.len(), train.len());
        assert!(rest.iter().all(|i| !dev.contains(i)));
        assert_eq!(dev_holdout(&train, &labels, 0.1, 3, 0).unwrap().1, dev);
        assert_eq!(dev_holdout(&[0], &labels, 0.1, 3, 0), Err(SplitError::NoDev(1)));
    }
}
