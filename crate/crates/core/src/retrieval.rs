//! Traditional ranking over the whole index and classify-then-rank retrieval.

use std::fmt::Write as _;

use crate::classify::Classifier;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, IndexEntry, LabeledIndex};
use crate::similarity::Similarity;

/// Default number of images returned per query.
pub const DEFAULT_TOP_N: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalParams {
    pub n: usize,
    pub similarity: Similarity,
    /// Keep the index entry whose id equals the query id in the ranked list.
    pub include_self: bool,
    /// Hide the query's own index entry from the kNN vote.
    pub classifier_excludes_self: bool,
}

impl RetrievalParams {
    pub fn new(similarity: Similarity) -> Self {
        RetrievalParams {
            n: DEFAULT_TOP_N,
            similarity,
            include_self: false,
            classifier_excludes_self: false,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedHit {
    pub id: String,
    pub label: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub query_id: Option<String>,
    /// Set by classify-then-rank retrieval only.
    pub predicted_class: Option<String>,
    /// Ascending by distance, ties by id; at most `n` hits.
    pub ranked: Vec<RankedHit>,
    pub n: usize,
    /// Entries that were eligible for ranking.
    pub pool_size: usize,
    /// Distance computations performed.
    pub evaluations: usize,
}

impl RetrievalResult {
    /// One line per hit, `<rank>\t<id>\t<class>\t<distance>`, after a
    /// `#predicted_class=` line when a class was predicted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(c) = &self.predicted_class {
            let _ = writeln!(out, "#predicted_class={c}");
        }
        for (rank, hit) in self.ranked.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}\t{:.6}", rank + 1, hit.id, hit.label, hit.distance);
        }
        out
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    Ok(())
}

/// Ranks `pool` against `query` and keeps the first `n` hits.
fn rank<'a>(
    pool: impl Iterator<Item = &'a IndexEntry>,
    query: &FeatureVector,
    n: usize,
    similarity: &Similarity,
) -> Result<(Vec<RankedHit>, usize)> {
    let mut scored = Vec::new();
    for e in pool {
        scored.push((similarity.distance(query, &e.features)?, e));
    }
    let evaluations = scored.len();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let ranked = scored
        .into_iter()
        .take(n)
        .map(|(distance, e)| RankedHit {
            id: e.id.clone(),
            label: e.label.clone(),
            distance,
        })
        .collect();
    Ok((ranked, evaluations))
}

fn eligible(e: &IndexEntry, query_id: Option<&str>, include_self: bool) -> bool {
    include_self || Some(e.id.as_str()) != query_id
}

/// Ranks every index entry (except the query's own id) against `query`.
pub fn query_traditional(
    index: &LabeledIndex,
    query: &FeatureVector,
    query_id: Option<&str>,
    params: &RetrievalParams,
) -> Result<RetrievalResult> {
    check_n(params.n)?;
    params.similarity.metric.check_method(index.method)?;
    let pool = index
        .entries
        .iter()
        .filter(|e| eligible(e, query_id, params.include_self));
    let (ranked, evaluations) = rank(pool, query, params.n, &params.similarity)?;
    Ok(RetrievalResult {
        query_id: query_id.map(str::to_owned),
        predicted_class: None,
        ranked,
        n: params.n,
        pool_size: evaluations,
        evaluations,
    })
}

/// Predicts the query's class with `model`, then ranks only index entries of that class.
pub fn query_ml(
    model: &Classifier,
    index: &LabeledIndex,
    query: &FeatureVector,
    query_id: Option<&str>,
    params: &RetrievalParams,
) -> Result<RetrievalResult> {
    check_n(params.n)?;
    params.similarity.metric.check_method(index.method)?;
    if model.method() != index.method {
        return Err(Error::Incompatible(format!(
            "model was trained on {} features, index holds {}",
            model.method(),
            index.method
        )));
    }
    let exclude = if params.classifier_excludes_self { query_id } else { None };
    let predicted = model.predict_excluding(query, exclude)?;
    let pool = index
        .entries
        .iter()
        .filter(|e| e.label == predicted && eligible(e, query_id, params.include_self));
    let (ranked, evaluations) = rank(pool, query, params.n, &params.similarity)?;
    if ranked.is_empty() {
        log::warn!(
            "predicted class {predicted:?} has no retrievable images for query {}",
            query_id.unwrap_or("<external>")
        );
    }
    Ok(RetrievalResult {
        query_id: query_id.map(str::to_owned),
        predicted_class: Some(predicted),
        ranked,
        n: params.n,
        pool_size: evaluations,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{train_knn, ClassifierSpec};
    use crate::features::FeatureMethod;
    use crate::similarity::Metric;
    use crate::transform::RctPlusConfig;

    fn index(points: &[(&str, &str, f64)]) -> LabeledIndex {
        let config = RctPlusConfig::new(vec![2], false);
        let layout = config.layout();
        let mut idx = LabeledIndex::new(FeatureMethod::Energy, config);
        for (id, label, x) in points {
            idx.entries.push(IndexEntry {
                id: id.to_string(),
                label: label.to_string(),
                features: FeatureVector::new(FeatureMethod::Energy, layout.clone(), vec![*x, 0.0, 0.0, 0.0, 0.0, 0.0])
                    .unwrap(),
            });
        }
        idx
    }

    fn ed(n: usize) -> RetrievalParams {
        RetrievalParams::new(Similarity::new(Metric::Euclidean)).with_n(n)
    }

    #[test]
    fn hand_computed_order() {
        let idx = index(&[("a", "p", 3.0), ("b", "q", -1.0), ("c", "p", 1.5)]);
        let q = idx.entries[0].features.clone();
        let mut q0 = q.clone();
        q0.values[0] = 0.5;
        let r = query_traditional(&idx, &q0, None, &ed(3)).unwrap();
        let got: Vec<(&str, f64)> = r.ranked.iter().map(|h| (h.id.as_str(), h.distance)).collect();
        assert_eq!(got, vec![("c", 1.0), ("b", 1.5), ("a", 2.5)]);
        assert_eq!(r.evaluations, 3);
    }

    #[test]
    fn duplicate_ranks_first_and_self_is_excluded() {
        let idx = index(&[("a", "p", 1.0), ("b", "p", 1.0), ("c", "q", 4.0)]);
        let q = idx.entries[0].features.clone();
        let r = query_traditional(&idx, &q, Some("a"), &ed(10)).unwrap();
        assert_eq!(r.ranked[0].id, "b");
        assert_eq!(r.ranked[0].distance, 0.0);
        assert_eq!(r.ranked.len(), 2);
        assert!(r.ranked.iter().all(|h| h.id != "a"));
        let mut p = ed(10);
        p.include_self = true;
        let r = query_traditional(&idx, &q, Some("a"), &p).unwrap();
        assert_eq!((r.ranked[0].id.as_str(), r.ranked.len()), ("a", 3));
        assert!(query_traditional(&idx, &q, None, &ed(0)).is_err());
    }

    #[test]
    fn ml_ranks_only_predicted_class() {
        let pts: Vec<(String, String, f64)> = (0..32)
            .map(|i| (format!("i{i:02}"), format!("c{}", i / 16), (i / 16) as f64 * 100.0 + (i % 16) as f64))
            .collect();
        let refs: Vec<(&str, &str, f64)> = pts.iter().map(|(a, b, x)| (a.as_str(), b.as_str(), *x)).collect();
        let idx = index(&refs);
        let model = ClassifierSpec::Knn {
            k: 1,
            similarity: Similarity::new(Metric::Euclidean),
        }
        .train(&idx)
        .unwrap();
        let e = &idx.entries[20];
        let r = query_ml(&model, &idx, &e.features, Some(&e.id), &ed(15)).unwrap();
        assert_eq!(r.predicted_class.as_deref(), Some("c1"));
        assert_eq!(r.ranked.len(), 15);
        assert_eq!(r.evaluations, 15);
        assert!(r.ranked.iter().all(|h| h.label == "c1"));
        let trad = query_traditional(&idx, &e.features, Some(&e.id), &ed(31)).unwrap();
        assert_eq!(trad.evaluations, 31);
        let filtered: Vec<_> = trad.ranked.into_iter().filter(|h| h.label == "c1").take(15).collect();
        assert_eq!(r.ranked, filtered);
        let text = r.to_text();
        assert!(text.starts_with("#predicted_class=c1\n1\ti"));
        assert_eq!(text.lines().count(), 16);
    }

    #[test]
    fn empty_predicted_class_is_not_an_error() {
        let idx = index(&[("a", "p", 0.0), ("b", "q", 5.0), ("c", "q", 6.0)]);
        let model = Classifier::Knn(train_knn(&idx, 1, Metric::Euclidean).unwrap());
        let q = idx.entries[0].features.clone();
        let r = query_ml(&model, &idx, &q, Some("a"), &ed(15)).unwrap();
        assert_eq!(r.predicted_class.as_deref(), Some("p"));
        assert!(r.ranked.is_empty());
    }
}
