//! Query classifiers (kNN and one-vs-rest linear SVM), cross-validation and
//! accuracy measures.

mod cv;
mod knn;
mod metrics;
mod svm;

use std::fs;
use std::path::{Path, PathBuf};

pub use cv::{assign_folds, cross_validate, CvReport, FoldAssignment};
pub use knn::{train_knn, KnnModel};
pub use metrics::{accuracy, confusion_counts, AccuracyMeasures, ConfusionCounts};
pub use svm::{train_svm_linear, train_svm_with_history, LinearSvmModel, SvmParams};

use crate::error::{Error, Result};
use crate::features::{FeatureMethod, FeatureVector, LabeledIndex};
use crate::similarity::{Metric, Similarity};

/// Untrained classifier choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierSpec {
    Knn { k: usize, similarity: Similarity },
    Svm(SvmParams),
}

impl ClassifierSpec {
    /// kNN with `k = 1` and the metric paired with `method`.
    pub fn default_knn(method: FeatureMethod) -> Self {
        ClassifierSpec::Knn {
            k: 1,
            similarity: Similarity::new(Metric::for_method(method)),
        }
    }

    pub fn train(&self, index: &LabeledIndex) -> Result<Classifier> {
        match *self {
            ClassifierSpec::Knn { k, similarity } => KnnModel::train(index, k, similarity).map(Classifier::Knn),
            ClassifierSpec::Svm(params) => train_svm_linear(index, params).map(Classifier::Svm),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Classifier {
    Knn(KnnModel),
    Svm(LinearSvmModel),
}

impl Classifier {
    pub fn method(&self) -> FeatureMethod {
        match self {
            Classifier::Knn(m) => m.method,
            Classifier::Svm(m) => m.method,
        }
    }

    pub fn predict(&self, fv: &FeatureVector) -> Result<String> {
        self.predict_excluding(fv, None)
    }

    /// kNN ignores the training entry `exclude_id`; the SVM is unaffected.
    pub fn predict_excluding(&self, fv: &FeatureVector, exclude_id: Option<&str>) -> Result<String> {
        match self {
            Classifier::Knn(m) => m.predict_excluding(fv, exclude_id),
            Classifier::Svm(m) => m.predict(fv),
        }
    }
}

/// On-disk kNN model: parameters plus the path of the index holding its training set.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModelFile {
    pub k: usize,
    pub similarity: Similarity,
    pub index_path: PathBuf,
}

impl KnnModelFile {
    pub fn to_text(&self) -> Result<String> {
        let path = self
            .index_path
            .to_str()
            .filter(|p| !p.contains(['\n', '\r']))
            .ok_or_else(|| Error::Config(format!("index path {:?} cannot be stored", self.index_path)))?;
        Ok(format!(
            "#knn\n#k={}\n#metric={}\n#approx_term={}\n#index={path}\n",
            self.k,
            self.similarity.metric,
            u8::from(self.similarity.approx_term)
        ))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l) != Some("#knn") {
            return Err(Error::format(1, "kNN model files start with #knn"));
        }
        let (mut k, mut metric, mut approx, mut index_path) = (None, None, true, None);
        for (i, line) in lines {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .strip_prefix('#')
                .and_then(|l| l.split_once('='))
                .ok_or_else(|| Error::format(lineno, "expected #key=value"))?;
            let bad = || Error::format(lineno, format!("bad {key} value {value:?}"));
            match key {
                "k" => k = Some(value.parse::<usize>().map_err(|_| bad())?),
                "metric" => metric = Some(value.parse::<Metric>().map_err(|_| bad())?),
                "approx_term" => {
                    approx = match value {
                        "0" => false,
                        "1" => true,
                        _ => return Err(bad()),
                    }
                }
                "index" => index_path = Some(PathBuf::from(value)),
                _ => return Err(Error::format(lineno, format!("unknown key {key:?}"))),
            }
        }
        let end = text.lines().count() + 1;
        let missing = |what: &str| Error::format(end, format!("missing #{what}="));
        Ok(KnnModelFile {
            k: k.ok_or_else(|| missing("k"))?,
            similarity: Similarity {
                metric: metric.ok_or_else(|| missing("metric"))?,
                approx_term: approx,
            },
            index_path: index_path.ok_or_else(|| missing("index"))?,
        })
    }
}

/// Writes `classifier` to `path`. kNN models need the path of their training index.
pub fn save_model(classifier: &Classifier, index_path: Option<&Path>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match classifier {
        Classifier::Svm(m) => m.to_text(),
        Classifier::Knn(m) => {
            let index_path = index_path
                .ok_or_else(|| Error::Config("a kNN model file must reference its index file".into()))?;
            KnnModelFile {
                k: m.k,
                similarity: m.similarity,
                index_path: index_path.to_path_buf(),
            }
            .to_text()?
        }
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a model file. A relative kNN index path is taken relative to the model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<Classifier> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.starts_with("#svm") {
        return LinearSvmModel::parse(&text).map(Classifier::Svm);
    }
    let file = KnnModelFile::parse(&text)?;
    let index_path = match path.parent() {
        Some(dir) if file.index_path.is_relative() => dir.join(&file.index_path),
        _ => file.index_path.clone(),
    };
    let index = LabeledIndex::load(&index_path)?;
    KnnModel::train(&index, file.k, file.similarity).map(Classifier::Knn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::svm::tests::point_index;

    #[test]
    fn knn_model_file_references_index() {
        let dir = tempfile::tempdir().unwrap();
        let pts: Vec<_> = (0..8).map(|i| (format!("c{}", i % 2), i as f64, 0.0)).collect();
        let index = point_index(&pts);
        index.save(dir.path().join("train.idx")).unwrap();
        let spec = ClassifierSpec::Knn {
            k: 3,
            similarity: Similarity::new(Metric::Euclidean),
        };
        let model = spec.train(&index).unwrap();
        let model_path = dir.path().join("knn.model");
        assert!(save_model(&model, None, &model_path).is_err());
        save_model(&model, Some(Path::new("train.idx")), &model_path).unwrap();
        let text = fs::read_to_string(&model_path).unwrap();
        assert!(text.contains("#index=train.idx") && text.contains("#metric=ED"));
        let Classifier::Knn(loaded) = load_model(&model_path).unwrap() else {
            panic!("expected kNN");
        };
        assert_eq!((loaded.k, loaded.len()), (3, 8));
    }

    #[test]
    fn svm_model_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let pts: Vec<_> = (0..8).map(|i| (format!("c{}", i % 2), (i % 2) as f64, i as f64)).collect();
        let index = point_index(&pts);
        let model = ClassifierSpec::Svm(SvmParams::default()).train(&index).unwrap();
        let path = dir.path().join("svm.model");
        save_model(&model, None, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        for e in &index.entries {
            assert_eq!(loaded.predict(&e.features).unwrap(), model.predict(&e.features).unwrap());
        }
    }
}
