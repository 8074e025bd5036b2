//! Zero-mean generalized Gaussian models of subband coefficients.
//!
//! A GGD with scale `alpha` and shape `beta` has density
//! `p(x) = beta / (2 alpha Γ(1/beta)) * exp(-(|x|/alpha)^beta)`.
//! `beta = 2` is a Gaussian with standard deviation `alpha/sqrt(2)`,
//! `beta = 1` a Laplacian with scale `alpha`.

pub mod special;

use std::fmt;

use special::{digamma, ln_gamma, trigamma};

pub const ALPHA_MIN: f64 = 1e-8;
pub const ALPHA_MAX: f64 = 1e8;
pub const BETA_MIN: f64 = 0.05;
pub const BETA_MAX: f64 = 10.0;

/// Fewest samples a fit accepts.
pub const MIN_SAMPLES: usize = 16;

const BETA_TOL: f64 = 1e-8;
const MLE_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdParams {
    pub alpha: f64,
    pub beta: f64,
}

impl GgdParams {
    /// Substitute used when a subband carries no information.
    pub const DEGENERATE: GgdParams = GgdParams { alpha: ALPHA_MIN, beta: 2.0 };

    pub fn new(alpha: f64, beta: f64) -> Self {
        GgdParams { alpha, beta }
    }

    /// Clamps both parameters into the supported estimation range.
    pub fn clamped(self) -> Self {
        GgdParams {
            alpha: self.alpha.clamp(ALPHA_MIN, ALPHA_MAX),
            beta: self.beta.clamp(BETA_MIN, BETA_MAX),
        }
    }

    pub fn in_range(&self) -> bool {
        (ALPHA_MIN..=ALPHA_MAX).contains(&self.alpha) && (BETA_MIN..=BETA_MAX).contains(&self.beta)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let GgdParams { alpha, beta } = *self;
        beta.ln() - (2.0 * alpha).ln() - ln_gamma(1.0 / beta) - (x.abs() / alpha).powf(beta)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }
}

impl fmt::Display for GgdParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GGD(alpha={}, beta={})", self.alpha, self.beta)
    }
}

/// How a fit ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    /// The estimate hit the edge of the supported parameter range.
    Clamped,
    /// Maximum likelihood did not converge; the moment estimate is returned.
    FellBackToMoments,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdFit {
    pub params: GgdParams,
    pub status: FitStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FitError {
    #[error("{0} samples is below the minimum of {MIN_SAMPLES}")]
    TooFewSamples(usize),
    /// All samples are identical (including all zero).
    #[error("degenerate samples: all values are identical")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Moments,
    MaximumLikelihood,
}

impl Estimator {
    pub fn fit(self, samples: &[f64]) -> Result<GgdFit, FitError> {
        match self {
            Estimator::Moments => fit_mme(samples),
            Estimator::MaximumLikelihood => fit_mle(samples),
        }
    }
}

/// `Γ(2/β)² / (Γ(1/β) Γ(3/β))`, the ratio `(E|x|)² / E[x²]` of a GGD with shape `β`.
pub fn mme_ratio(beta: f64) -> f64 {
    (2.0 * ln_gamma(2.0 / beta) - ln_gamma(1.0 / beta) - ln_gamma(3.0 / beta)).exp()
}

fn check_samples(samples: &[f64]) -> Result<(), FitError> {
    if samples.len() < MIN_SAMPLES {
        return Err(FitError::TooFewSamples(samples.len()));
    }
    let first = samples[0];
    if samples.iter().all(|&x| x == first) {
        return Err(FitError::Degenerate);
    }
    Ok(())
}

fn abs_moments(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let m1 = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    let m2 = samples.iter().map(|x| x * x).sum::<f64>() / n;
    (m1, m2)
}

/// Moment-matching fit: solves `mme_ratio(β) = m1²/m2` by bisection.
pub fn fit_mme(samples: &[f64]) -> Result<GgdFit, FitError> {
    check_samples(samples)?;
    let (m1, m2) = abs_moments(samples);
    if m2 == 0.0 || !m1.is_finite() || !m2.is_finite() {
        return Err(FitError::Degenerate);
    }
    let target = m1 * m1 / m2;

    let (mut status, beta) = if target <= mme_ratio(BETA_MIN) {
        (FitStatus::Clamped, BETA_MIN)
    } else if target >= mme_ratio(BETA_MAX) {
        (FitStatus::Clamped, BETA_MAX)
    } else {
        let (mut lo, mut hi) = (BETA_MIN, BETA_MAX);
        while hi - lo >= BETA_TOL {
            let mid = 0.5 * (lo + hi);
            if mme_ratio(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (FitStatus::Converged, 0.5 * (lo + hi))
    };
    let alpha = m1 * (ln_gamma(1.0 / beta) - ln_gamma(2.0 / beta)).exp();
    let params = GgdParams { alpha, beta }.clamped();
    if params.alpha != alpha {
        status = FitStatus::Clamped;
    }
    Ok(GgdFit { params, status })
}

/// Log-likelihood of `samples` under `params`.
pub fn log_likelihood(params: &GgdParams, samples: &[f64]) -> f64 {
    let GgdParams { alpha, beta } = *params;
    let n = samples.len() as f64;
    let tail: f64 = samples.iter().map(|x| (x.abs() / alpha).powf(beta)).sum();
    n * (beta.ln() - (2.0 * alpha).ln() - ln_gamma(1.0 / beta)) - tail
}

/// Power sums over normalized magnitudes, used by the likelihood equation.
struct ShapeEquation {
    /// `ln(|x_i| / scale)` for the non-zero samples.
    logs: Vec<f64>,
    n: f64,
}

struct PowerSums {
    s0: f64,
    s1: f64,
    s2: f64,
}

impl ShapeEquation {
    fn new(samples: &[f64], scale: f64) -> Self {
        let logs = samples
            .iter()
            .filter(|x| **x != 0.0)
            .map(|x| (x.abs() / scale).ln())
            .collect();
        ShapeEquation {
            logs,
            n: samples.len() as f64,
        }
    }

    fn sums(&self, beta: f64) -> PowerSums {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &self.logs {
            let p = (beta * l).exp();
            s0 += p;
            s1 += p * l;
            s2 += p * l * l;
        }
        PowerSums { s0, s1, s2 }
    }

    /// `g(β) = 1 + ψ(1/β)/β − S1/S0 + ln(β S0/N)/β` and its derivative.
    /// `g(β)/β` is the derivative of the profile log-likelihood (per sample).
    fn value_and_slope(&self, beta: f64) -> (f64, f64) {
        let PowerSums { s0, s1, s2 } = self.sums(beta);
        let inv = 1.0 / beta;
        let psi = digamma(inv);
        let ratio = s1 / s0;
        let log_term = (beta * s0 / self.n).ln();
        let g = 1.0 + psi * inv - ratio + log_term * inv;
        let dg = -psi * inv * inv - trigamma(inv) * inv * inv * inv - (s2 * s0 - s1 * s1) / (s0 * s0)
            - log_term * inv * inv
            + inv * (inv + ratio);
        (g, dg)
    }

    /// Profile scale `((β/N) Σ|x|^β)^(1/β)` in normalized units.
    fn alpha(&self, beta: f64) -> f64 {
        (beta * self.sums(beta).s0 / self.n).powf(1.0 / beta)
    }
}

/// Maximum-likelihood fit: safeguarded Newton iteration on the shape equation,
/// started from the moment estimate.
pub fn fit_mle(samples: &[f64]) -> Result<GgdFit, FitError> {
    let moments = fit_mme(samples)?;
    let (m1, _) = abs_moments(samples);
    let eq = ShapeEquation::new(samples, m1);

    let (g_lo, _) = eq.value_and_slope(BETA_MIN);
    let (g_hi, _) = eq.value_and_slope(BETA_MAX);
    let (beta, status) = if !(g_lo > 0.0) {
        (BETA_MIN, FitStatus::Clamped)
    } else if !(g_hi < 0.0) {
        (BETA_MAX, FitStatus::Clamped)
    } else {
        match solve_shape(&eq, moments.params.beta) {
            Some(beta) => (beta, FitStatus::Converged),
            None => {
                return Ok(GgdFit {
                    params: moments.params,
                    status: FitStatus::FellBackToMoments,
                })
            }
        }
    };

    let alpha = m1 * eq.alpha(beta);
    let mut params = GgdParams { alpha, beta }.clamped();
    let mut status = if params.alpha != alpha { FitStatus::Clamped } else { status };
    if !params.alpha.is_finite() || log_likelihood(&params, samples) < log_likelihood(&moments.params, samples) {
        params = moments.params;
        status = FitStatus::FellBackToMoments;
    }
    Ok(GgdFit { params, status })
}

/// Newton steps inside a sign-change bracket, bisecting whenever a step leaves it.
fn solve_shape(eq: &ShapeEquation, start: f64) -> Option<f64> {
    let (mut lo, mut hi) = (BETA_MIN, BETA_MAX);
    let mut beta = start.clamp(lo, hi);
    if beta <= lo || beta >= hi {
        beta = 0.5 * (lo + hi);
    }
    for _ in 0..MLE_MAX_ITER {
        let (g, dg) = eq.value_and_slope(beta);
        if !g.is_finite() {
            return None;
        }
        if g == 0.0 {
            return Some(beta);
        }
        // g > 0 below the likelihood maximum, g < 0 above it.
        if g > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let newton = beta - g / dg;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - beta).abs() < BETA_TOL || hi - lo < BETA_TOL {
            return Some(next);
        }
        beta = next;
    }
    None
}

/// Closed-form `KL(p ‖ q)` between two zero-mean GGDs. Saturates to `+inf` when the
/// divergence exceeds the f64 range.
pub fn kld_ggd(p: &GgdParams, q: &GgdParams) -> f64 {
    if p == q {
        return 0.0;
    }
    let log_norm = (p.beta * q.alpha).ln() + ln_gamma(1.0 / q.beta)
        - (q.beta * p.alpha).ln()
        - ln_gamma(1.0 / p.beta);
    let cross = (q.beta * (p.alpha / q.alpha).ln() + ln_gamma((q.beta + 1.0) / p.beta)
        - ln_gamma(1.0 / p.beta))
    .exp();
    (log_norm + cross - 1.0 / p.beta).max(0.0)
}

/// Symmetrized divergence `KL(p‖q) + KL(q‖p)`.
pub fn skld(p: &GgdParams, q: &GgdParams) -> f64 {
    kld_ggd(p, q) + kld_ggd(q, p)
}
