//! Redundant (undecimated) Laplacian pyramid with pseudo-Gaussian smoothing.

use crate::error::{Error, Result};
use crate::ingest::GrayImage;
use crate::matrix::Matrix;

/// Standard deviation of the smoothing kernel at `level` (1-based).
pub fn level_sigma(level: usize, sigma0: f64) -> f64 {
    sigma0 * 2f64.powi(level as i32 - 1)
}

/// Normalized 1D Gaussian taps for `level`, truncated at radius `ceil(4*sigma)`.
///
/// The returned vector has length `2r+1` with the center tap at index `r`.
pub fn pseudo_gaussian_kernel(level: usize, sigma0: f64) -> Vec<f64> {
    assert!(level >= 1, "pyramid levels are 1-based");
    let sigma = level_sigma(level, sigma0);
    let radius = (4.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let z: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= z);
    taps
}

/// Whole-sample-repeating mirror index ("half-sample symmetric"): -1 -> 0, n -> n-1.
#[inline]
pub(crate) fn mirror_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn convolve_rows(src: &Matrix, taps: &[f64]) -> Matrix {
    let radius = (taps.len() / 2) as isize;
    let cols = src.cols();
    let mut out = Matrix::zeros(src.rows(), cols);
    for r in 0..src.rows() {
        let row = src.row(r);
        for c in 0..cols {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[mirror_index(c as isize + k as isize - radius, cols)];
            }
            out[(r, c)] = acc;
        }
    }
    out
}

fn convolve_cols(src: &Matrix, taps: &[f64]) -> Matrix {
    let radius = (taps.len() / 2) as isize;
    let rows = src.rows();
    let mut out = Matrix::zeros(rows, src.cols());
    for r in 0..rows {
        for (k, t) in taps.iter().enumerate() {
            let src_row = src.row(mirror_index(r as isize + k as isize - radius, rows));
            for (c, v) in src_row.iter().enumerate() {
                out[(r, c)] += t * v;
            }
        }
    }
    out
}

/// Separable smoothing with mirror boundary extension, rows first.
pub fn smooth(src: &Matrix, taps: &[f64]) -> Matrix {
    convolve_cols(&convolve_rows(src, taps), taps)
}

/// Detail images `RLP_1..RLP_L` plus the low-pass approximation `C_L`,
/// all at input resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RlpPyramid {
    pub details: Vec<Matrix>,
    pub approximation: Matrix,
}

impl RlpPyramid {
    /// Sum of all details plus the approximation.
    pub fn reconstruct(&self) -> Matrix {
        let mut out = self.approximation.clone();
        for d in &self.details {
            for (o, v) in out.as_mut_slice().iter_mut().zip(d.as_slice()) {
                *o += v;
            }
        }
        out
    }
}

/// Cascade `C_l = smooth_l(C_{l-1})`, `RLP_l = C_{l-1} - C_l`, starting from the image.
pub fn rlp_decompose(img: &GrayImage, levels: usize, sigma0: f64) -> Result<RlpPyramid> {
    if levels < 1 {
        return Err(Error::Config("pyramid needs at least one level".into()));
    }
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::Config(format!("sigma0 must be positive, got {sigma0}")));
    }
    let taps_last = pseudo_gaussian_kernel(levels, sigma0);
    if taps_last.len() > img.height().min(img.width()) {
        log::warn!(
            "kernel support {} at level {levels} exceeds the {}x{} image; boundary extension dominates",
            taps_last.len(),
            img.height(),
            img.width()
        );
    }
    let mut current = img.as_matrix().clone();
    let mut details = Vec::with_capacity(levels);
    for level in 1..=levels {
        let next = smooth(&current, &pseudo_gaussian_kernel(level, sigma0));
        details.push(current.sub(&next));
        current = next;
    }
    Ok(RlpPyramid {
        details,
        approximation: current,
    })
}
