use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{ConfigHeader, FeatureMethod, FeatureVector, LabeledIndex};
use crate::similarity::Standardizer;
use crate::transform::RctPlusConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            epochs: 200,
            seed: 0,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be a positive finite number, got {}", self.c)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("at least one training epoch is required".into()));
        }
        Ok(())
    }
}

/// One-vs-rest linear classifiers over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub method: FeatureMethod,
    pub config: RctPlusConfig,
    pub params: SvmParams,
    pub standardizer: Standardizer,
    /// Sorted class labels; row `i` of `weights` and `biases[i]` score `classes[i]`.
    pub classes: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

pub fn train_svm_linear(index: &LabeledIndex, params: SvmParams) -> Result<LinearSvmModel> {
    train_svm_with_history(index, params).map(|(model, _)| model)
}

/// Trains and also returns the regularized hinge objective, summed over the
/// one-vs-rest problems, after every epoch.
pub fn train_svm_with_history(index: &LabeledIndex, params: SvmParams) -> Result<(LinearSvmModel, Vec<f64>)> {
    params.validate()?;
    let classes = index.classes();
    if classes.len() < 2 {
        return Err(Error::Config(format!(
            "SVM training needs at least 2 classes, found {}",
            classes.len()
        )));
    }
    if index
        .entries
        .iter()
        .any(|e| e.features.values.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Config("SVM training features must be finite".into()));
    }
    let standardizer = Standardizer::fit(index.entries.iter().map(|e| e.features.values.as_slice()))?;
    let xs: Vec<Vec<f64>> = index
        .entries
        .iter()
        .map(|e| standardizer.apply(&e.features.values))
        .collect();
    let n = xs.len();
    let lambda = 1.0 / (params.c * n as f64);

    // Summation order is shuffled per epoch; the same permutations serve every class.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let orders: Vec<Vec<usize>> = (0..params.epochs)
        .map(|_| {
            order.shuffle(&mut rng);
            order.clone()
        })
        .collect();

    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    let mut history = vec![0.0; params.epochs];
    for class in &classes {
        let ys: Vec<f64> = index
            .entries
            .iter()
            .map(|e| if &e.label == class { 1.0 } else { -1.0 })
            .collect();
        let (w, b, losses) = train_binary(&xs, &ys, lambda, &orders);
        for (h, l) in history.iter_mut().zip(losses) {
            *h += l;
        }
        weights.push(w);
        biases.push(b);
    }
    let model = LinearSvmModel {
        method: index.method,
        config: index.config.clone(),
        params,
        standardizer,
        classes,
        weights,
        biases,
    };
    Ok((model, history))
}

/// Full-batch subgradient descent on `λ/2 |(w,b)|² + mean hinge` with step `1/(λt)`
/// and projection onto the ball of radius `1/√λ`.
fn train_binary(xs: &[Vec<f64>], ys: &[f64], lambda: f64, orders: &[Vec<usize>]) -> (Vec<f64>, f64, Vec<f64>) {
    let dim = xs[0].len();
    let n = xs.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut grad = vec![0.0; dim];
    let mut losses = Vec::with_capacity(orders.len());
    for (epoch, order) in orders.iter().enumerate() {
        let t = (epoch + 1) as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for &i in order {
            let y = ys[i];
            if y * (dot(&w, &xs[i]) + b) < 1.0 {
                for (g, x) in grad.iter_mut().zip(&xs[i]) {
                    *g += y * x;
                }
                grad_b += y;
            }
        }
        let eta = 1.0 / (lambda * t);
        let shrink = 1.0 - eta * lambda;
        for (wj, g) in w.iter_mut().zip(&grad) {
            *wj = shrink * *wj + eta * g / n;
        }
        b = shrink * b + eta * grad_b / n;
        let norm = (dot(&w, &w) + b * b).sqrt();
        let radius = 1.0 / lambda.sqrt();
        if norm > radius {
            let s = radius / norm;
            w.iter_mut().for_each(|wj| *wj *= s);
            b *= s;
        }
        losses.push(objective(xs, ys, &w, b, lambda));
    }
    (w, b, losses)
}

fn objective(xs: &[Vec<f64>], ys: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
        .sum();
    0.5 * lambda * (dot(w, w) + b * b) + hinge / xs.len() as f64
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSvmModel {
    fn check_input(&self, fv: &FeatureVector) -> Result<()> {
        if fv.method != self.method {
            return Err(Error::Incompatible(format!(
                "model expects {} features, query has {}",
                self.method, fv.method
            )));
        }
        if fv.values.len() != self.standardizer.dim() {
            return Err(Error::Incompatible(format!(
                "model expects {} feature values, query has {}",
                self.standardizer.dim(),
                fv.values.len()
            )));
        }
        Ok(())
    }

    /// Class scores for an already standardized vector, in `classes` order.
    pub fn scores_standardized(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, z) + b)
            .collect()
    }

    pub fn scores(&self, fv: &FeatureVector) -> Result<Vec<f64>> {
        self.check_input(fv)?;
        Ok(self.scores_standardized(&self.standardizer.apply(&fv.values)))
    }

    /// Label of the highest score; ties go to the earlier (smaller) label.
    pub fn predict(&self, fv: &FeatureVector) -> Result<String> {
        let scores = self.scores(fv)?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = i;
            }
        }
        Ok(self.classes[best].clone())
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",");
        let mut out = String::from("#svm\n");
        ConfigHeader::write(&mut out, self.method, &self.config);
        out.push_str(&format!("#C={:.16e}\n", self.params.c));
        out.push_str(&format!("#epochs={}\n", self.params.epochs));
        out.push_str(&format!("#seed={}\n", self.params.seed));
        out.push_str(&format!("#mean={}\n", join(&self.standardizer.means)));
        out.push_str(&format!("#std={}\n", join(&self.standardizer.stds)));
        for ((label, w), b) in self.classes.iter().zip(&self.weights).zip(&self.biases) {
            out.push_str(&format!("{label}\t{b:.16e}\t{}\n", join(w)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        if lines.next().map(|(_, l)| l) != Some("#svm") {
            return Err(Error::format(1, "SVM model files start with #svm"));
        }
        let floats = |value: &str, lineno: usize| -> Result<Vec<f64>> {
            value
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(lineno, "unparseable number"))
        };
        let mut header = ConfigHeader::default();
        let mut params = SvmParams::default();
        let (mut means, mut stds) = (None, None);
        let mut body_line = 2;
        while let Some((i, line)) = lines.next_if(|(_, l)| l.starts_with('#')) {
            let lineno = i + 1;
            body_line = lineno + 1;
            let (key, value) = line[1..]
                .split_once('=')
                .ok_or_else(|| Error::format(lineno, "header must be #key=value"))?;
            if header.accept(key, value, lineno)? {
                continue;
            }
            let bad = || Error::format(lineno, format!("bad {key} value {value:?}"));
            match key {
                "C" => params.c = value.parse().map_err(|_| bad())?,
                "epochs" => params.epochs = value.parse().map_err(|_| bad())?,
                "seed" => params.seed = value.parse().map_err(|_| bad())?,
                "mean" => means = Some(floats(value, lineno)?),
                "std" => stds = Some(floats(value, lineno)?),
                _ => return Err(Error::format(lineno, format!("unknown header key {key:?}"))),
            }
        }
        let (method, config) = header.finish(body_line)?;
        let means = means.ok_or_else(|| Error::format(body_line, "missing #mean= header"))?;
        let stds = stds.ok_or_else(|| Error::format(body_line, "missing #std= header"))?;
        let dim = 2 * config.layout().len();
        if means.len() != dim || stds.len() != dim {
            return Err(Error::format(body_line, format!("standardization vectors must have {dim} values")));
        }
        if stds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::format(body_line, "standardization stds must be positive"));
        }
        let (mut classes, mut weights, mut biases) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let [label, bias, w] = line.split('\t').collect::<Vec<_>>()[..] else {
                return Err(Error::format(lineno, "expected <label>\\t<bias>\\t<weights>"));
            };
            let w = floats(w, lineno)?;
            if w.len() != dim {
                return Err(Error::format(lineno, format!("expected {dim} weights, found {}", w.len())));
            }
            classes.push(label.to_owned());
            biases.push(bias.parse().map_err(|_| Error::format(lineno, "unparseable bias"))?);
            weights.push(w);
        }
        if classes.len() < 2 || classes.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::format(
                text.lines().count(),
                "model needs at least 2 classes in strictly sorted order",
            ));
        }
        Ok(LinearSvmModel {
            method,
            config,
            params,
            standardizer: Standardizer { means, stds },
            classes,
            weights,
            biases,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::features::IndexEntry;
    use rand::Rng;

    /// Energy index over `RctPlusConfig::new([2])`, whose vectors have 6 slots;
    /// the 2D points fill the first two and the rest stay 0.
    pub(crate) fn point_index(points: &[(String, f64, f64)]) -> LabeledIndex {
        let config = RctPlusConfig::new(vec![2], false);
        let layout = config.layout();
        let mut index = LabeledIndex::new(FeatureMethod::Energy, config);
        for (i, (label, x, y)) in points.iter().enumerate() {
            index.entries.push(IndexEntry {
                id: format!("p{i:04}"),
                label: label.clone(),
                features: FeatureVector::new(FeatureMethod::Energy, layout.clone(), vec![*x, *y, 0.0, 0.0, 0.0, 0.0])
                    .unwrap(),
            });
        }
        index
    }

    fn probe(index: &LabeledIndex, x: f64, y: f64) -> FeatureVector {
        let mut fv = index.entries[0].features.clone();
        fv.values[0] = x;
        fv.values[1] = y;
        fv
    }

    fn clouds(seed: u64, per_class: usize) -> Vec<(String, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for _ in 0..per_class {
            pts.push(("left".to_string(), rng.random_range(-3.0..-0.5), rng.random_range(-2.0..2.0)));
            pts.push(("right".to_string(), rng.random_range(0.5..3.0), rng.random_range(-2.0..2.0)));
        }
        pts
    }

    #[test]
    fn separable_clouds_fit_perfectly() {
        let index = point_index(&clouds(1, 50));
        let model = train_svm_linear(&index, SvmParams::default()).unwrap();
        for e in &index.entries {
            assert_eq!(model.predict(&e.features).unwrap(), e.label, "{}", e.id);
        }
    }

    #[test]
    fn duplication_with_halved_c_keeps_decision_function() {
        let pts = clouds(2, 30);
        let index = point_index(&pts);
        let doubled: Vec<_> = pts.iter().chain(&pts).cloned().collect();
        let index2 = point_index(&doubled);
        let params = SvmParams::default();
        let m1 = train_svm_linear(&index, params).unwrap();
        let m2 = train_svm_linear(&index2, SvmParams { c: params.c / 2.0, ..params }).unwrap();
        for gx in -4..=4 {
            for gy in -4..=4 {
                let q = probe(&index, gx as f64, gy as f64);
                let (s1, s2) = (m1.scores(&q).unwrap(), m2.scores(&q).unwrap());
                for (a, b) in s1.iter().zip(&s2) {
                    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let index = point_index(&clouds(3, 20));
        let a = train_svm_linear(&index, SvmParams::default()).unwrap();
        let b = train_svm_linear(&index, SvmParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_rejected() {
        let index = point_index(&[("a".into(), 0.0, 0.0), ("a".into(), 1.0, 0.0)]);
        assert!(matches!(train_svm_linear(&index, SvmParams::default()), Err(Error::Config(_))));
        let two = point_index(&clouds(4, 3));
        assert!(train_svm_linear(&two, SvmParams { c: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn zero_model_picks_smallest_label() {
        let index = point_index(&clouds(5, 5));
        let mut model = train_svm_linear(&index, SvmParams::default()).unwrap();
        model.weights.iter_mut().for_each(|w| w.iter_mut().for_each(|x| *x = 0.0));
        model.biases.iter_mut().for_each(|b| *b = 0.0);
        assert_eq!(model.predict(&probe(&index, 99.0, -7.0)).unwrap(), "left");
    }

    #[test]
    fn standardization_matches_twin_input() {
        let index = point_index(&clouds(6, 25));
        let model = train_svm_linear(&index, SvmParams::default()).unwrap();
        let z = [0.7, -1.3, 0.0, 0.0, 0.0, 0.0];
        let raw: Vec<f64> = z
            .iter()
            .zip(model.standardizer.means.iter().zip(&model.standardizer.stds))
            .map(|(z, (m, s))| z * s + m)
            .collect();
        let q = probe(&index, raw[0], raw[1]);
        let direct = model.scores_standardized(&z);
        for (a, b) in model.scores(&q).unwrap().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_is_non_increasing_across_checkpoints() {
        let mut pts = clouds(7, 40);
        // A few label flips make the problem non-separable.
        for p in pts.iter_mut().step_by(13) {
            p.0 = if p.0 == "left" { "right".into() } else { "left".into() };
        }
        let index = point_index(&pts);
        let (_, history) = train_svm_with_history(&index, SvmParams::default()).unwrap();
        let checkpoints: Vec<f64> = history
            .chunks(20)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        for w in checkpoints.windows(2) {
            assert!(w[1] <= w[0] + 1e-3, "{checkpoints:?}");
        }
    }

    #[test]
    fn model_file_round_trip() {
        let index = point_index(&clouds(8, 10));
        let model = train_svm_linear(&index, SvmParams { c: 0.5, epochs: 30, seed: 9 }).unwrap();
        let text = model.to_text();
        assert!(text.starts_with("#svm\n"));
        assert_eq!(LinearSvmModel::parse(&text).unwrap(), model);
        let broken = text.replace("#std=", "#sdt=");
        assert!(matches!(LinearSvmModel::parse(&broken), Err(Error::Format { .. })));
    }

    #[test]
    fn layout_mismatch_is_incompatible() {
        let index = point_index(&clouds(9, 5));
        let model = train_svm_linear(&index, SvmParams { epochs: 5, ..Default::default() }).unwrap();
        let mut q = index.entries[0].features.clone();
        q.method = FeatureMethod::Ggd1;
        assert!(matches!(model.predict(&q), Err(Error::Incompatible(_))));
    }
}
