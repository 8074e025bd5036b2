//! Average retrieval rate over a labeled index, false-prediction counts and
//! scheme comparison tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::{cross_validate, Classifier, ClassifierSpec, SvmParams};
use crate::error::{Error, Result};
use crate::features::{FeatureMethod, LabeledIndex};
use crate::retrieval::{query_ml, query_traditional, RetrievalParams, RetrievalResult, DEFAULT_TOP_N};
use crate::similarity::{Metric, Similarity};

/// Per-class training images used by default.
pub const DEFAULT_TRAIN_PER_CLASS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Traditional,
    KnnCbir,
    SvmCbir,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Traditional, Scheme::KnnCbir, Scheme::SvmCbir];

    pub fn is_ml(self) -> bool {
        self != Scheme::Traditional
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Traditional => "traditional",
            Scheme::KnnCbir => "kNN-CBIR",
            Scheme::SvmCbir => "SVM-CBIR",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "trad" | "traditional" => Ok(Scheme::Traditional),
            "knn" | "knn-cbir" => Ok(Scheme::KnnCbir),
            "svm" | "svm-cbir" => Ok(Scheme::SvmCbir),
            _ => Err(Error::Config(format!("unknown scheme {s:?} (expected trad, knn or svm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub scheme: Scheme,
    pub n: usize,
    /// Ranking similarity; `None` pairs the metric with the feature method.
    pub similarity: Option<Similarity>,
    pub knn_k: usize,
    /// kNN vote similarity; `None` uses the ranking similarity.
    pub knn_similarity: Option<Similarity>,
    pub svm: SvmParams,
    /// Seed for the training split and cross-validation folds.
    pub seed: u64,
    /// Training images per class; each class keeps at least one image out.
    pub train_per_class: usize,
    /// Query only the images left out of the training split.
    pub held_out_only: bool,
    /// Rank only training-split images instead of the whole index.
    pub pool_training_only: bool,
    pub include_self: bool,
    pub classifier_excludes_self: bool,
    /// Cross-validation folds for the reported classifier accuracy.
    pub cv_folds: Option<usize>,
}

impl EvalConfig {
    pub fn new(scheme: Scheme) -> Self {
        EvalConfig {
            scheme,
            n: DEFAULT_TOP_N,
            similarity: None,
            knn_k: 1,
            knn_similarity: None,
            svm: SvmParams::default(),
            seed: 0,
            train_per_class: DEFAULT_TRAIN_PER_CLASS,
            held_out_only: false,
            pool_training_only: false,
            include_self: false,
            classifier_excludes_self: false,
            cv_folds: None,
        }
    }

    fn ranking_similarity(&self, method: FeatureMethod) -> Similarity {
        self.similarity
            .unwrap_or_else(|| Similarity::new(Metric::for_method(method)))
    }

    /// Classifier trained by the scheme, if any.
    pub fn classifier_spec(&self, method: FeatureMethod) -> Option<ClassifierSpec> {
        match self.scheme {
            Scheme::Traditional => None,
            Scheme::KnnCbir => Some(ClassifierSpec::Knn {
                k: self.knn_k,
                similarity: self
                    .knn_similarity
                    .unwrap_or_else(|| self.ranking_similarity(method)),
            }),
            Scheme::SvmCbir => Some(ClassifierSpec::Svm(self.svm)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub query_id: String,
    pub true_class: String,
    pub predicted_class: Option<String>,
    pub relevant: usize,
    pub n_used: usize,
}

impl QueryRecord {
    pub fn rate(&self) -> f64 {
        if self.n_used == 0 {
            0.0
        } else {
            self.relevant as f64 / self.n_used as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scheme: Scheme,
    pub method: FeatureMethod,
    pub n: usize,
    pub ar_percent: f64,
    /// Queries whose predicted class differs from the true one; ML schemes only.
    pub false_predictions: Option<usize>,
    pub accuracy: Option<f64>,
    pub records: Vec<QueryRecord>,
}

pub const REPORT_CSV_HEADER: &str = "scheme,method,AR_percent,false_predictions,accuracy,n_queries";

impl EvalReport {
    pub fn n_queries(&self) -> usize {
        self.records.len()
    }

    /// One CSV row matching [`REPORT_CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.4},{},{},{}",
            self.scheme,
            self.method,
            self.ar_percent,
            self.false_predictions.map(|f| f.to_string()).unwrap_or_default(),
            self.accuracy.map(|a| format!("{a:.4}")).unwrap_or_default(),
            self.n_queries()
        )
    }

    pub fn per_query_csv(&self) -> String {
        let mut out = String::from("query_id,true_class,predicted_class,relevant,n_used,rate\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                r.query_id,
                r.true_class,
                r.predicted_class.as_deref().unwrap_or(""),
                r.relevant,
                r.n_used,
                r.rate()
            );
        }
        out
    }
}

pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Fraction of ranked hits in `true_class`, over the number of hits returned
/// (`min(N, pool size)`). An empty result scores 0.
pub fn retrieval_rate(result: &RetrievalResult, true_class: &str) -> f64 {
    if result.ranked.is_empty() {
        return 0.0;
    }
    let relevant = result.ranked.iter().filter(|h| h.label == true_class).count();
    relevant as f64 / result.ranked.len() as f64
}

/// Seeded per-class split: `min(per_class, size - 1)` members of every class
/// go to training. Returns the training ids.
pub fn training_split(index: &LabeledIndex, per_class: usize, seed: u64) -> Result<HashSet<String>> {
    if per_class == 0 {
        return Err(Error::Config("training split needs at least one image per class".into()));
    }
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &index.entries {
        by_class.entry(&e.label).or_default().push(&e.id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = HashSet::new();
    for (label, mut ids) in by_class {
        if ids.len() < 2 {
            return Err(Error::Config(format!(
                "class {label:?} has a single image; a training split needs at least 2"
            )));
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let take = per_class.min(ids.len() - 1);
        train.extend(ids[..take].iter().map(|s| s.to_string()));
    }
    Ok(train)
}

/// Runs every selected index image as a query under `config.scheme`.
pub fn evaluate(index: &LabeledIndex, config: &EvalConfig) -> Result<EvalReport> {
    if index.is_empty() {
        return Err(Error::Config("cannot evaluate an empty index".into()));
    }
    index.validate()?;
    let mut canonical = index.clone();
    canonical.entries.sort_by(|a, b| a.id.cmp(&b.id));

    let needs_split = config.scheme.is_ml() || config.held_out_only || config.pool_training_only;
    let train_ids = if needs_split {
        Some(training_split(&canonical, config.train_per_class, config.seed)?)
    } else {
        None
    };
    let in_train = |id: &str| train_ids.as_ref().is_some_and(|t| t.contains(id));
    let train_index = canonical.filtered(|e| in_train(&e.id));

    let (classifier, accuracy) = match config.classifier_spec(index.method) {
        None => (None, None),
        Some(spec) => {
            let model = spec.train(&train_index)?;
            let accuracy = match config.cv_folds {
                Some(folds) => Some(cross_validate(&train_index, &spec, folds, config.seed)?.mean_accuracy),
                None => None,
            };
            (Some(model), accuracy)
        }
    };

    let pool = if config.pool_training_only { &train_index } else { &canonical };
    let params = RetrievalParams {
        n: config.n,
        similarity: config.ranking_similarity(index.method),
        include_self: config.include_self,
        classifier_excludes_self: config.classifier_excludes_self,
    };
    let queries: Vec<_> = canonical
        .entries
        .iter()
        .filter(|e| !config.held_out_only || !in_train(&e.id))
        .collect();
    if queries.is_empty() {
        return Err(Error::Config("no queries left to evaluate".into()));
    }
    let records = queries
        .par_iter()
        .map(|e| {
            let result = run_query(classifier.as_ref(), pool, e, &params)?;
            Ok(QueryRecord {
                query_id: e.id.clone(),
                true_class: e.label.clone(),
                relevant: result.ranked.iter().filter(|h| h.label == e.label).count(),
                n_used: result.ranked.len(),
                predicted_class: result.predicted_class,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rate_sum: f64 = records.iter().map(QueryRecord::rate).sum();
    let ar_percent = 100.0 * rate_sum / records.len() as f64;
    let false_predictions = classifier.as_ref().map(|_| {
        records
            .iter()
            .filter(|r| r.predicted_class.as_deref() != Some(r.true_class.as_str()))
            .count()
    });
    Ok(EvalReport {
        scheme: config.scheme,
        method: index.method,
        n: config.n,
        ar_percent,
        false_predictions,
        accuracy,
        records,
    })
}

fn run_query(
    classifier: Option<&Classifier>,
    pool: &LabeledIndex,
    e: &crate::features::IndexEntry,
    params: &RetrievalParams,
) -> Result<RetrievalResult> {
    match classifier {
        None => query_traditional(pool, &e.features, Some(&e.id), params),
        Some(model) => query_ml(model, pool, &e.features, Some(&e.id), params),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: FeatureMethod,
    pub scheme: Scheme,
    pub baseline_ar: f64,
    pub scheme_ar: f64,
}

impl ComparisonRow {
    pub fn difference(&self) -> f64 {
        self.scheme_ar - self.baseline_ar
    }

    /// Difference in percentage points with two decimals and an explicit `+`.
    pub fn difference_text(&self) -> String {
        format_difference(self.difference())
    }
}

pub fn format_difference(d: f64) -> String {
    let s = format!("{d:+.2}");
    if s == "+0.00" || s == "-0.00" {
        "0.00".to_owned()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,scheme,AR_traditional,AR_scheme,Difference_percent\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.2},{:.2},{}",
                r.method,
                r.scheme,
                r.baseline_ar,
                r.scheme_ar,
                r.difference_text()
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8}{:<10}{:>14}{:>12}{:>14}\n",
            "method", "scheme", "traditional", "scheme", "Difference%"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8}{:<10}{:>14.2}{:>12.2}{:>14}",
                r.method.to_string(),
                r.scheme.to_string(),
                r.baseline_ar,
                r.scheme_ar,
                r.difference_text()
            );
        }
        out
    }
}

/// Pairs every ML report with the traditional report of the same method.
pub fn compare_schemes(reports: &[EvalReport]) -> Result<ComparisonTable> {
    let Some(first) = reports.first() else {
        return Err(Error::Comparison("no reports to compare".into()));
    };
    for r in reports {
        if r.n != first.n || r.n_queries() != first.n_queries() {
            return Err(Error::Comparison(format!(
                "reports differ in settings: N {} vs {}, {} vs {} queries",
                first.n,
                r.n,
                first.n_queries(),
                r.n_queries()
            )));
        }
    }
    let mut rows = Vec::new();
    let mut methods: Vec<FeatureMethod> = reports.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    for method in methods {
        let of_method: Vec<&EvalReport> = reports.iter().filter(|r| r.method == method).collect();
        let baselines: Vec<&&EvalReport> = of_method.iter().filter(|r| r.scheme == Scheme::Traditional).collect();
        let [baseline] = baselines[..] else {
            return Err(Error::Comparison(format!(
                "{method} needs exactly one traditional report, found {}",
                baselines.len()
            )));
        };
        let mut ml: Vec<&&EvalReport> = of_method.iter().filter(|r| r.scheme.is_ml()).collect();
        ml.sort_by_key(|r| r.scheme);
        if ml.is_empty() {
            return Err(Error::Comparison(format!("{method} has no ML report to compare")));
        }
        for r in ml {
            rows.push(ComparisonRow {
                method,
                scheme: r.scheme,
                baseline_ar: baseline.ar_percent,
                scheme_ar: r.ar_percent,
            });
        }
    }
    Ok(ComparisonTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureVector, IndexEntry};
    use crate::retrieval::RankedHit;
    use crate::transform::RctPlusConfig;

    fn report(scheme: Scheme, method: FeatureMethod, ar: f64) -> EvalReport {
        EvalReport {
            scheme,
            method,
            n: 15,
            ar_percent: ar,
            false_predictions: None,
            accuracy: None,
            records: Vec::new(),
        }
    }

    fn result(labels: &[&str]) -> RetrievalResult {
        RetrievalResult {
            query_id: None,
            predicted_class: None,
            ranked: labels
                .iter()
                .enumerate()
                .map(|(i, l)| RankedHit {
                    id: format!("h{i}"),
                    label: l.to_string(),
                    distance: i as f64,
                })
                .collect(),
            n: 15,
            pool_size: labels.len(),
            evaluations: labels.len(),
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(retrieval_rate(&result(&["a"; 15]), "a"), 1.0);
        assert_eq!(retrieval_rate(&result(&["b"; 15]), "a"), 0.0);
        let mut mixed = vec!["a"; 12];
        mixed.extend(["b"; 3]);
        assert!((retrieval_rate(&result(&mixed), "a") - 0.8).abs() < 1e-15);
        assert_eq!(retrieval_rate(&result(&[]), "a"), 0.0);
    }

    #[test]
    fn published_differences() {
        let t = compare_schemes(&[
            report(Scheme::Traditional, FeatureMethod::Ggd2, 64.95),
            report(Scheme::SvmCbir, FeatureMethod::Ggd2, 97.59),
            report(Scheme::Traditional, FeatureMethod::Ggd1, 77.15),
            report(Scheme::KnnCbir, FeatureMethod::Ggd1, 99.69),
        ])
        .unwrap();
        let diffs: Vec<String> = t.rows.iter().map(|r| r.difference_text()).collect();
        assert_eq!(diffs, vec!["+22.54", "+32.64"]);
        assert!(t.to_csv().lines().nth(2).unwrap().ends_with(",+32.64"));
        let same = compare_schemes(&[
            report(Scheme::Traditional, FeatureMethod::Energy, 80.0),
            report(Scheme::KnnCbir, FeatureMethod::Energy, 80.0),
        ])
        .unwrap();
        assert_eq!(same.rows[0].difference_text(), "0.00");
    }

    #[test]
    fn comparison_needs_matching_settings() {
        let mut other = report(Scheme::KnnCbir, FeatureMethod::Ggd1, 90.0);
        other.n = 10;
        let r = compare_schemes(&[report(Scheme::Traditional, FeatureMethod::Ggd1, 80.0), other]);
        assert!(matches!(r, Err(Error::Comparison(_))));
        let r = compare_schemes(&[report(Scheme::KnnCbir, FeatureMethod::Ggd1, 80.0)]);
        assert!(matches!(r, Err(Error::Comparison(_))));
    }

    fn toy_index() -> LabeledIndex {
        let config = RctPlusConfig::new(vec![2], false);
        let layout = config.layout();
        let mut idx = LabeledIndex::new(FeatureMethod::Energy, config);
        for c in 0..3 {
            for i in 0..6 {
                let x = c as f64 * 50.0 + i as f64;
                idx.entries.push(IndexEntry {
                    id: format!("c{c}_{i}"),
                    label: format!("c{c}"),
                    features: FeatureVector::new(FeatureMethod::Energy, layout.clone(), vec![x, 1.0, 0.0, 0.0, 0.0, 0.0])
                        .unwrap(),
                });
            }
        }
        idx
    }

    #[test]
    fn separated_fixture_is_perfect() {
        let idx = toy_index();
        let mut cfg = EvalConfig::new(Scheme::Traditional);
        cfg.n = 5;
        let trad = evaluate(&idx, &cfg).unwrap();
        assert_eq!((trad.ar_percent, trad.false_predictions), (100.0, None));
        cfg.scheme = Scheme::KnnCbir;
        let knn = evaluate(&idx, &cfg).unwrap();
        assert_eq!((knn.ar_percent, knn.false_predictions), (100.0, Some(0)));
        assert!(reports_csv(&[trad, knn]).starts_with(REPORT_CSV_HEADER));
    }

    #[test]
    fn entry_order_does_not_matter() {
        let idx = toy_index();
        let mut shuffled = idx.clone();
        shuffled.entries.reverse();
        shuffled.entries.swap(2, 9);
        for scheme in Scheme::ALL {
            let mut cfg = EvalConfig::new(scheme);
            cfg.train_per_class = 3;
            cfg.seed = 4;
            let a = evaluate(&idx, &cfg).unwrap();
            let b = evaluate(&shuffled, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn split_keeps_one_image_out() {
        let idx = toy_index();
        let train = training_split(&idx, 15, 0).unwrap();
        assert_eq!(train.len(), 15);
        let mut cfg = EvalConfig::new(Scheme::SvmCbir);
        cfg.held_out_only = true;
        let r = evaluate(&idx, &cfg).unwrap();
        assert_eq!(r.n_queries(), 3);
    }
}
