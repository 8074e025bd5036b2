use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// One-vs-rest outcome counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `(tp + tn) / (tp + fp + tn + fn)`.
    pub fn accuracy(&self) -> Result<f64> {
        if self.total() == 0 {
            return Err(Error::UndefinedMeasure("accuracy of zero predictions".into()));
        }
        Ok((self.tp + self.tn) as f64 / self.total() as f64)
    }
}

/// Per-class counts for every label seen in `truth` or `predicted`, sorted by label.
pub fn confusion_counts<S: AsRef<str>>(truth: &[S], predicted: &[S]) -> Vec<(String, ConfusionCounts)> {
    assert_eq!(truth.len(), predicted.len());
    let labels: BTreeSet<&str> = truth.iter().chain(predicted).map(|s| s.as_ref()).collect();
    labels
        .into_iter()
        .map(|c| {
            let mut counts = ConfusionCounts::default();
            for (t, p) in truth.iter().zip(predicted) {
                match (t.as_ref() == c, p.as_ref() == c) {
                    (true, true) => counts.tp += 1,
                    (false, true) => counts.fp += 1,
                    (true, false) => counts.fn_ += 1,
                    (false, false) => counts.tn += 1,
                }
            }
            (c.to_owned(), counts)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyMeasures {
    /// Correct predictions over all predictions.
    pub multiclass: f64,
    /// `Σ(tp + tn) / Σ(tp + fp + tn + fn)` pooled over classes.
    pub micro_one_vs_rest: f64,
}

/// Both accuracy measures from the per-class one-vs-rest counts of one prediction run.
pub fn accuracy(counts: &[ConfusionCounts]) -> Result<AccuracyMeasures> {
    let Some(first) = counts.first() else {
        return Err(Error::UndefinedMeasure("no classes".into()));
    };
    let total = first.total();
    if total == 0 {
        return Err(Error::UndefinedMeasure("accuracy of zero predictions".into()));
    }
    if counts.iter().any(|c| c.total() != total) {
        return Err(Error::Invariant("per-class counts disagree on the prediction total".into()));
    }
    let correct: usize = counts.iter().map(|c| c.tp).sum();
    let agree: usize = counts.iter().map(|c| c.tp + c.tn).sum();
    Ok(AccuracyMeasures {
        multiclass: correct as f64 / total as f64,
        micro_one_vs_rest: agree as f64 / (total * counts.len()) as f64,
    })
}
