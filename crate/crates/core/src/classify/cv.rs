use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ClassifierSpec;
use crate::error::{Error, Result};
use crate::features::LabeledIndex;

/// Fold of every entry plus whether the split is stratified by class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub folds: Vec<usize>,
    pub n_folds: usize,
    pub stratified: bool,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }
}

/// Seeded fold split. Stratified when every class has at least `n_folds`
/// members, otherwise a plain shuffled split.
pub fn assign_folds<S: AsRef<str>>(labels: &[S], n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {n_folds}")));
    }
    if n_folds > labels.len() {
        return Err(Error::Config(format!(
            "{n_folds} folds requested for {} entries",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_ref()).or_default().push(i);
    }
    let stratified = by_class.values().all(|m| m.len() >= n_folds);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    if stratified {
        // Offsets carry over between classes so fold sizes stay balanced.
        let mut offset = 0;
        for members in by_class.values_mut() {
            members.shuffle(&mut rng);
            for (j, &i) in members.iter().enumerate() {
                folds[i] = (offset + j) % n_folds;
            }
            offset += members.len();
        }
    } else {
        log::warn!("a class has fewer than {n_folds} members; using an unstratified split");
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        for (j, &i) in all.iter().enumerate() {
            folds[i] = j % n_folds;
        }
    }
    Ok(FoldAssignment {
        folds,
        n_folds,
        stratified,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub assignment: FoldAssignment,
    /// Multiclass accuracy of each held-out fold.
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Trains on `n_folds - 1` folds and scores the held-out one, for every fold.
pub fn cross_validate(index: &LabeledIndex, spec: &ClassifierSpec, n_folds: usize, seed: u64) -> Result<CvReport> {
    let labels: Vec<&str> = index.entries.iter().map(|e| e.label.as_str()).collect();
    let assignment = assign_folds(&labels, n_folds, seed)?;
    let fold_accuracies = (0..n_folds)
        .into_par_iter()
        .map(|fold| {
            let train = LabeledIndex {
                method: index.method,
                config: index.config.clone(),
                entries: index
                    .entries
                    .iter()
                    .zip(&assignment.folds)
                    .filter(|(_, f)| **f != fold)
                    .map(|(e, _)| e.clone())
                    .collect(),
            };
            let model = spec.train(&train)?;
            let test = assignment.test_indices(fold);
            let mut correct = 0;
            for &i in &test {
                let e = &index.entries[i];
                if model.predict(&e.features)? == e.label {
                    correct += 1;
                }
            }
            Ok(correct as f64 / test.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / n_folds as f64;
    Ok(CvReport {
        assignment,
        fold_accuracies,
        mean_accuracy,
    })
}
