//! Distances between feature vectors.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{FeatureMethod, FeatureVector};
use crate::ggd::skld;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Sum of symmetric KL divergences between per-subband GGDs.
    Kld,
    /// Euclidean distance between raw vectors.
    Euclidean,
}

impl Metric {
    /// Metric paired with each feature method.
    pub fn for_method(method: FeatureMethod) -> Metric {
        if method.is_ggd() {
            Metric::Kld
        } else {
            Metric::Euclidean
        }
    }

    pub fn check_method(self, method: FeatureMethod) -> Result<()> {
        if self == Metric::Kld && !method.is_ggd() {
            return Err(Error::Metric(format!("KLD is undefined for {method} features")));
        }
        Ok(())
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Kld => "KLD",
            Metric::Euclidean => "ED",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "KLD" => Ok(Metric::Kld),
            "ED" | "EUCLIDEAN" => Ok(Metric::Euclidean),
            _ => Err(Error::Config(format!("unknown metric {s:?} (expected KLD or ED)"))),
        }
    }
}

/// A metric plus whether the approximation subband contributes to KLD sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Similarity {
    pub metric: Metric,
    pub approx_term: bool,
}

impl Similarity {
    pub fn new(metric: Metric) -> Self {
        Similarity {
            metric,
            approx_term: true,
        }
    }

    pub fn without_approx_term(mut self) -> Self {
        self.approx_term = false;
        self
    }

    pub fn distance(&self, q: &FeatureVector, t: &FeatureVector) -> Result<f64> {
        q.check_compatible(t)?;
        self.metric.check_method(q.method)?;
        Ok(match self.metric {
            Metric::Kld => kld_sum(q, t, self.approx_term),
            Metric::Euclidean => q
                .values
                .iter()
                .zip(&t.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        })
    }
}

fn kld_sum(q: &FeatureVector, t: &FeatureVector, approx_term: bool) -> f64 {
    let mut total = 0.0;
    for (i, pos) in q.layout.iter().enumerate() {
        if !approx_term && pos.is_approximation() {
            continue;
        }
        total += skld(&t.ggd(i), &q.ggd(i));
    }
    total
}

/// Distance with the approximation term included.
pub fn distance(q: &FeatureVector, t: &FeatureVector, metric: Metric) -> Result<f64> {
    Similarity::new(metric).distance(q, t)
}

/// Per-component z-score parameters. Components with zero spread pass through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of each component.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let Some(first) = rows.first() else {
            return Err(Error::Config("cannot standardize an empty set".into()));
        };
        let dim = first.len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for r in &rows {
            if r.len() != dim {
                return Err(Error::Incompatible("rows of different length".into()));
            }
            for (m, v) in means.iter_mut().zip(*r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; dim];
        for r in &rows {
            for ((s, v), m) in vars.iter_mut().zip(*r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let mut stds: Vec<f64> = vars.into_iter().map(|v| (v / n).sqrt()).collect();
        for (s, m) in stds.iter_mut().zip(means.iter_mut()) {
            if !(*s > 1e-12 * m.abs().max(1e-300)) {
                *s = 1.0;
                *m = 0.0;
            }
        }
        Ok(Standardizer { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}
