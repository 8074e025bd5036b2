//! Subband feature vectors (GGD parameters or energy moments) and the
//! persisted labeled index.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ggd::{Estimator, FitError, GgdParams};
use crate::ingest::{Dataset, GrayImage};
use crate::transform::{rct_plus, RctPlusConfig, RctPlusDecomposition, SubbandPosition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureMethod {
    /// GGD fitted by moment matching.
    Ggd1,
    /// GGD fitted by maximum likelihood.
    Ggd2,
    /// Mean absolute value and RMS per subband.
    Energy,
}

impl FeatureMethod {
    pub const ALL: [FeatureMethod; 3] = [FeatureMethod::Ggd1, FeatureMethod::Ggd2, FeatureMethod::Energy];

    pub fn tag(self) -> &'static str {
        match self {
            FeatureMethod::Ggd1 => "GGD1",
            FeatureMethod::Ggd2 => "GGD2",
            FeatureMethod::Energy => "E",
        }
    }

    pub fn estimator(self) -> Option<Estimator> {
        match self {
            FeatureMethod::Ggd1 => Some(Estimator::Moments),
            FeatureMethod::Ggd2 => Some(Estimator::MaximumLikelihood),
            FeatureMethod::Energy => None,
        }
    }

    pub fn is_ggd(self) -> bool {
        self.estimator().is_some()
    }
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GGD1" => Ok(FeatureMethod::Ggd1),
            "GGD2" => Ok(FeatureMethod::Ggd2),
            "E" => Ok(FeatureMethod::Energy),
            _ => Err(Error::Config(format!("unknown feature method {s:?} (expected GGD1, GGD2 or E)"))),
        }
    }
}

/// Two values per subband in canonical layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub method: FeatureMethod,
    pub layout: Vec<SubbandPosition>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(method: FeatureMethod, layout: Vec<SubbandPosition>, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * layout.len() {
            return Err(Error::Invariant(format!(
                "{} values for {} subbands",
                values.len(),
                layout.len()
            )));
        }
        Ok(FeatureVector { method, layout, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(first, second)` value pair of every subband.
    pub fn pairs(&self) -> impl Iterator<Item = (SubbandPosition, f64, f64)> + '_ {
        self.layout
            .iter()
            .zip(self.values.chunks_exact(2))
            .map(|(pos, v)| (*pos, v[0], v[1]))
    }

    /// Fitted model of subband `i`; only meaningful for GGD methods.
    pub fn ggd(&self, i: usize) -> GgdParams {
        GgdParams::new(self.values[2 * i], self.values[2 * i + 1])
    }

    pub fn check_compatible(&self, other: &FeatureVector) -> Result<()> {
        if self.method != other.method {
            return Err(Error::Incompatible(format!(
                "feature methods differ: {} vs {}",
                self.method, other.method
            )));
        }
        if self.layout != other.layout || self.values.len() != other.values.len() {
            return Err(Error::Incompatible(format!(
                "subband layouts differ ({} vs {} subbands)",
                self.layout.len(),
                other.layout.len()
            )));
        }
        Ok(())
    }
}

fn centered(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v - mean).collect()
}

/// One GGD per subband; the approximation is mean-centered before fitting.
/// Degenerate or undersized subbands get [`GgdParams::DEGENERATE`].
pub fn extract_ggd_features(decomp: &RctPlusDecomposition, estimator: Estimator) -> FeatureVector {
    let method = match estimator {
        Estimator::Moments => FeatureMethod::Ggd1,
        Estimator::MaximumLikelihood => FeatureMethod::Ggd2,
    };
    let mut values = Vec::with_capacity(2 * decomp.subbands.len());
    for band in &decomp.subbands {
        let coeffs = band.coefficients.as_slice();
        let fit = if band.position.is_approximation() {
            estimator.fit(&centered(coeffs))
        } else {
            estimator.fit(coeffs)
        };
        let params = match fit {
            Ok(fit) => fit.params,
            Err(FitError::Degenerate | FitError::TooFewSamples(_)) => GgdParams::DEGENERATE,
        };
        values.push(params.alpha);
        values.push(params.beta);
    }
    FeatureVector {
        method,
        layout: decomp.layout(),
        values,
    }
}

/// Mean absolute value `E` and root mean square `F` of every subband.
pub fn extract_energy_features(decomp: &RctPlusDecomposition) -> FeatureVector {
    let mut values = Vec::with_capacity(2 * decomp.subbands.len());
    for band in &decomp.subbands {
        let (e, f) = energy_moments(band.coefficients.as_slice());
        values.push(e);
        values.push(f);
    }
    FeatureVector {
        method: FeatureMethod::Energy,
        layout: decomp.layout(),
        values,
    }
}

/// `(mean |c|, sqrt(mean c²))`.
pub fn energy_moments(coeffs: &[f64]) -> (f64, f64) {
    if coeffs.is_empty() {
        return (0.0, 0.0);
    }
    let n = coeffs.len() as f64;
    let e = coeffs.iter().map(|c| c.abs()).sum::<f64>() / n;
    let f = (coeffs.iter().map(|c| c * c).sum::<f64>() / n).sqrt();
    (e, f)
}

pub fn extract_features(decomp: &RctPlusDecomposition, method: FeatureMethod) -> FeatureVector {
    match method.estimator() {
        Some(est) => extract_ggd_features(decomp, est),
        None => extract_energy_features(decomp),
    }
}

/// Decomposes `img` and extracts features in one step.
pub fn image_features(img: &GrayImage, config: &RctPlusConfig, method: FeatureMethod) -> Result<FeatureVector> {
    Ok(extract_features(&rct_plus(img, config)?, method))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: String,
    pub label: String,
    pub features: FeatureVector,
}

/// Labeled feature database.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledIndex {
    pub method: FeatureMethod,
    pub config: RctPlusConfig,
    pub entries: Vec<IndexEntry>,
}

const INDEX_VERSION: u32 = 1;

impl LabeledIndex {
    pub fn new(method: FeatureMethod, config: RctPlusConfig) -> Self {
        LabeledIndex {
            method,
            config,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct labels, sorted.
    pub fn classes(&self) -> Vec<String> {
        let mut classes: Vec<String> = self
            .entries
            .iter()
            .map(|e| e.label.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        classes.sort();
        classes
    }

    pub fn get(&self, id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Copy holding only the entries accepted by `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&IndexEntry) -> bool) -> LabeledIndex {
        LabeledIndex {
            method: self.method,
            config: self.config.clone(),
            entries: self.entries.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let layout = self.config.layout();
        let mut ids = HashSet::new();
        for e in &self.entries {
            if e.features.method != self.method {
                return Err(Error::Invariant(format!(
                    "entry {} uses method {}, index uses {}",
                    e.id, e.features.method, self.method
                )));
            }
            if e.features.layout != layout || e.features.values.len() != 2 * layout.len() {
                return Err(Error::Invariant(format!("entry {} has a foreign subband layout", e.id)));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(Error::Invariant(format!("duplicate image id {:?}", e.id)));
            }
            for field in [&e.id, &e.label] {
                if field.is_empty() || field.contains(['\t', '\n', '\r']) {
                    return Err(Error::Invariant(format!("unwritable id or label {field:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String> {
        self.validate()?;
        let mut out = String::new();
        out.push_str(&format!("#version={INDEX_VERSION}\n"));
        ConfigHeader::write(&mut out, self.method, &self.config);
        out.push_str(&format!("#count={}\n", self.entries.len()));
        for e in &self.entries {
            let values: Vec<String> = e.features.values.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&format!("{}\t{}\t{}\n", e.id, e.label, values.join(",")));
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(Error::format(text.lines().count(), "file is truncated (no final newline)"));
        }
        let mut header = ConfigHeader::default();
        let mut count = None;
        let mut body_start = None;

        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            let lineno = i + 1;
            let Some(h) = line.strip_prefix('#') else {
                body_start = Some(i);
                break;
            };
            let (key, value) = h
                .split_once('=')
                .ok_or_else(|| Error::format(lineno, "header must be #key=value"))?;
            if header.accept(key, value, lineno)? {
                continue;
            }
            match key {
                "version" => {
                    let v: u32 = value
                        .parse()
                        .map_err(|_| Error::format(lineno, format!("bad version value {value:?}")))?;
                    if v != INDEX_VERSION {
                        return Err(Error::format(lineno, format!("unsupported index version {v}")));
                    }
                }
                "count" => {
                    count = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| Error::format(lineno, format!("bad count value {value:?}")))?,
                    )
                }
                _ => return Err(Error::format(lineno, format!("unknown header key {key:?}"))),
            }
        }
        let header_end = body_start.unwrap_or(lines.len()) + 1;
        let (method, config) = header.finish(header_end)?;
        let layout = config.layout();
        let mut index = LabeledIndex::new(method, config);

        for (i, line) in lines.iter().enumerate().skip(body_start.unwrap_or(lines.len())) {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, label, values] = fields[..] else {
                return Err(Error::format(lineno, "expected <id>\\t<label>\\t<values>"));
            };
            let values: Vec<f64> = values
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(lineno, "unparseable feature value"))?;
            if values.len() != 2 * layout.len() {
                return Err(Error::format(
                    lineno,
                    format!("expected {} values, found {}", 2 * layout.len(), values.len()),
                ));
            }
            index.entries.push(IndexEntry {
                id: id.to_owned(),
                label: label.to_owned(),
                features: FeatureVector {
                    method,
                    layout: layout.clone(),
                    values,
                },
            });
        }
        if let Some(expected) = count {
            if expected != index.entries.len() {
                return Err(Error::format(
                    lines.len() + 1,
                    format!("index declares {expected} entries but holds {}", index.entries.len()),
                ));
            }
        }
        index
            .validate()
            .map_err(|e| Error::format(lines.len(), e.to_string()))?;
        Ok(index)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_text()?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// `#key=value` lines describing a feature method and decomposition, shared by
/// index and model files.
#[derive(Debug, Default)]
pub(crate) struct ConfigHeader {
    method: Option<FeatureMethod>,
    levels: Option<usize>,
    directions: Option<Vec<usize>>,
    sampled: Option<bool>,
    sigma0: Option<f64>,
}

impl ConfigHeader {
    pub(crate) fn write(out: &mut String, method: FeatureMethod, config: &RctPlusConfig) {
        out.push_str(&format!("#method={method}\n"));
        out.push_str(&format!("#L={}\n", config.levels));
        let dirs: Vec<String> = config.directions.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!("#D={}\n", dirs.join(",")));
        out.push_str(&format!("#sampled={}\n", u8::from(config.critically_sampled)));
        out.push_str(&format!("#sigma0={:.16e}\n", config.sigma0));
    }

    /// Consumes `key` if it belongs to the header; `Ok(false)` leaves it to the caller.
    pub(crate) fn accept(&mut self, key: &str, value: &str, lineno: usize) -> Result<bool> {
        let bad = |what: &str| Error::format(lineno, format!("bad {what} value {value:?}"));
        match key {
            "method" => self.method = Some(value.parse::<FeatureMethod>().map_err(|_| bad("method"))?),
            "L" => self.levels = Some(value.parse::<usize>().map_err(|_| bad("L"))?),
            "D" => {
                self.directions = Some(
                    value
                        .split(',')
                        .map(|d| d.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("D"))?,
                )
            }
            "sampled" => {
                self.sampled = Some(match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("sampled")),
                })
            }
            "sigma0" => self.sigma0 = Some(value.parse().map_err(|_| bad("sigma0"))?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub(crate) fn finish(self, lineno: usize) -> Result<(FeatureMethod, RctPlusConfig)> {
        let missing = |what: &str| Error::format(lineno, format!("missing #{what}= header"));
        let method = self.method.ok_or_else(|| missing("method"))?;
        let config = RctPlusConfig {
            levels: self.levels.ok_or_else(|| missing("L"))?,
            directions: self.directions.ok_or_else(|| missing("D"))?,
            sigma0: self.sigma0.unwrap_or(1.0),
            critically_sampled: self.sampled.ok_or_else(|| missing("sampled"))?,
        };
        config.validate().map_err(|e| Error::format(lineno, e.to_string()))?;
        Ok((method, config))
    }
}

/// Extracts features for every dataset image in parallel; entry order follows the dataset.
pub fn build_index(dataset: &Dataset, config: &RctPlusConfig, method: FeatureMethod) -> Result<LabeledIndex> {
    config.validate()?;
    let entries = dataset
        .images
        .par_iter()
        .map(|img| {
            Ok(IndexEntry {
                id: img.id.clone(),
                label: img.label.clone(),
                features: image_features(&img.image, config, method)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledIndex {
        method,
        config: config.clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::transform::Subband;

    fn decomposition_of(bands: Vec<Matrix>) -> RctPlusDecomposition {
        let n = bands.len() - 1;
        let config = RctPlusConfig::new(vec![n], false);
        let layout = config.layout();
        RctPlusDecomposition {
            config,
            subbands: layout
                .into_iter()
                .zip(bands)
                .map(|(position, coefficients)| Subband { position, coefficients })
                .collect(),
        }
    }

    fn sample_index() -> LabeledIndex {
        let config = RctPlusConfig::new(vec![2], true);
        let layout = config.layout();
        let mut index = LabeledIndex::new(FeatureMethod::Ggd1, config);
        for (i, label) in ["bark", "bark", "brick"].iter().enumerate() {
            let values = (0..6).map(|k| 0.1 + (i * 6 + k) as f64 / 7.0).collect();
            index.entries.push(IndexEntry {
                id: format!("img{i}"),
                label: label.to_string(),
                features: FeatureVector::new(FeatureMethod::Ggd1, layout.clone(), values).unwrap(),
            });
        }
        index
    }

    #[test]
    fn energy_of_small_subband() {
        assert_eq!(energy_moments(&[3.0, 4.0, 0.0, 0.0]), (1.75, 2.5));
        assert_eq!(energy_moments(&[0.0; 8]), (0.0, 0.0));
    }

    #[test]
    fn zero_decomposition_is_degenerate_everywhere() {
        let d = decomposition_of(vec![Matrix::zeros(8, 8); 3]);
        for est in [Estimator::Moments, Estimator::MaximumLikelihood] {
            let fv = extract_ggd_features(&d, est);
            assert_eq!(fv.len(), 6);
            for (_, a, b) in fv.pairs() {
                assert_eq!((a, b), (1e-8, 2.0));
            }
        }
        let e = extract_energy_features(&d);
        assert!(e.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn approximation_is_centered_before_fitting() {
        let ramp = Matrix::from_fn(8, 8, |r, c| (r * 8 + c) as f64);
        let shifted = Matrix::from_fn(8, 8, |r, c| 1000.0 + (r * 8 + c) as f64);
        let a = extract_ggd_features(&decomposition_of(vec![ramp.clone(), ramp.clone(), ramp]), Estimator::Moments);
        let b = extract_ggd_features(
            &decomposition_of(vec![Matrix::zeros(8, 8), Matrix::zeros(8, 8), shifted]),
            Estimator::Moments,
        );
        assert_eq!(a.values[4..6], b.values[4..6]);
    }

    #[test]
    fn method_tags_round_trip() {
        for m in FeatureMethod::ALL {
            assert_eq!(m.tag().parse::<FeatureMethod>().unwrap(), m);
        }
        assert!("GGD3".parse::<FeatureMethod>().is_err());
    }

    #[test]
    fn index_text_round_trip() {
        let index = sample_index();
        let text = index.to_text().unwrap();
        assert!(text.starts_with("#version=1\n#method=GGD1\n#L=1\n#D=2\n#sampled=1\n"));
        assert_eq!(LabeledIndex::parse(&text).unwrap(), index);
    }

    #[test]
    fn truncated_index_is_rejected() {
        let text = sample_index().to_text().unwrap();
        // Cut mid-line and at a line boundary.
        let cut = &text[..text.len() - 10];
        assert!(matches!(LabeledIndex::parse(cut), Err(Error::Format { .. })));
        let lines: Vec<&str> = text.lines().collect();
        let cut = lines[..lines.len() - 1].join("\n");
        assert!(matches!(LabeledIndex::parse(&cut), Err(Error::Format { .. })));
        assert!(matches!(LabeledIndex::parse("#method=GGD1\n"), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_values_report_line() {
        let text = sample_index().to_text().unwrap().replace("img1\tbark\t", "img1\tbark\tx");
        match LabeledIndex::parse(&text) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 9),
            other => panic!("unexpected {other:?}"),
        }
        let text = sample_index().to_text().unwrap().replace("#version=1", "#version=2");
        assert!(matches!(LabeledIndex::parse(&text), Err(Error::Format { line: 1, .. })));
    }

    #[test]
    fn mixed_methods_refused_on_save() {
        let mut index = sample_index();
        index.entries[1].features.method = FeatureMethod::Ggd2;
        assert!(matches!(index.to_text(), Err(Error::Invariant(_))));
        let tmp = tempfile::NamedTempFile::new().unwrap();
        assert!(index.save(tmp.path()).is_err());
    }

    #[test]
    fn duplicate_ids_refused() {
        let mut index = sample_index();
        index.entries[2].id = "img0".into();
        assert!(matches!(index.validate(), Err(Error::Invariant(_))));
    }
}
