use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::{FeatureMethod, FeatureVector, LabeledIndex};
use crate::similarity::{Metric, Similarity};

/// Stored training set queried by majority vote among the `k` nearest entries.
#[derive(Debug, Clone)]
pub struct KnnModel {
    pub k: usize,
    pub similarity: Similarity,
    pub method: FeatureMethod,
    ids: Vec<String>,
    labels: Vec<String>,
    vectors: Vec<FeatureVector>,
}

pub fn train_knn(index: &LabeledIndex, k: usize, metric: Metric) -> Result<KnnModel> {
    KnnModel::train(index, k, Similarity::new(metric))
}

impl KnnModel {
    pub fn train(index: &LabeledIndex, k: usize, similarity: Similarity) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::Config("kNN needs a non-empty training index".into()));
        }
        if k == 0 || k > index.len() {
            return Err(Error::Config(format!(
                "k = {k} must be in 1..={} (training set size)",
                index.len()
            )));
        }
        similarity.metric.check_method(index.method)?;
        Ok(KnnModel {
            k,
            similarity,
            method: index.method,
            ids: index.entries.iter().map(|e| e.id.clone()).collect(),
            labels: index.entries.iter().map(|e| e.label.clone()).collect(),
            vectors: index.entries.iter().map(|e| e.features.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn metric(&self) -> Metric {
        self.similarity.metric
    }

    /// Distance from `fv` to every stored entry, in training order.
    pub fn distances(&self, fv: &FeatureVector) -> Result<Vec<f64>> {
        self.vectors
            .iter()
            .map(|t| self.similarity.distance(fv, t))
            .collect()
    }

    /// Training positions sorted by `(distance, id)`, skipping `exclude_id`.
    pub fn ranked_neighbors(&self, fv: &FeatureVector, exclude_id: Option<&str>) -> Result<Vec<(usize, f64)>> {
        let dists = self.distances(fv)?;
        let mut order: Vec<(usize, f64)> = dists
            .into_iter()
            .enumerate()
            .filter(|(i, _)| Some(self.ids[*i].as_str()) != exclude_id)
            .collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| self.ids[a.0].cmp(&self.ids[b.0])));
        Ok(order)
    }

    pub fn predict(&self, fv: &FeatureVector) -> Result<String> {
        self.predict_excluding(fv, None)
    }

    /// Prediction that ignores the training entry `exclude_id`, if present.
    ///
    /// Vote ties go to the class with the smaller summed neighbor distance,
    /// then to the lexicographically smaller label.
    pub fn predict_excluding(&self, fv: &FeatureVector, exclude_id: Option<&str>) -> Result<String> {
        let neighbors = self.ranked_neighbors(fv, exclude_id)?;
        if neighbors.is_empty() {
            return Err(Error::Config("no training entries left after exclusion".into()));
        }
        let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for &(i, d) in neighbors.iter().take(self.k) {
            let v = votes.entry(self.labels[i].as_str()).or_insert((0, 0.0));
            v.0 += 1;
            v.1 += d;
        }
        let mut best: Option<(&str, usize, f64)> = None;
        for (label, (count, sum)) in votes {
            let better = match best {
                None => true,
                Some((_, bc, bs)) => count > bc || (count == bc && sum < bs),
            };
            if better {
                best = Some((label, count, sum));
            }
        }
        Ok(best.expect("at least one vote").0.to_owned())
    }
}
