//! Directional filter bank realized with brick-wall angular wedges in the DFT domain.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Direction counts the filter bank accepts.
pub const ALLOWED_DIRECTIONS: [usize; 4] = [2, 4, 8, 16];

pub fn check_directions(directions: usize) -> Result<()> {
    if ALLOWED_DIRECTIONS.contains(&directions) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "direction count must be one of {ALLOWED_DIRECTIONS:?}, got {directions}"
        )))
    }
}

#[inline]
fn signed_bin(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Wedge (0-based) that owns DFT bin `(ky, kx)` of a `rows x cols` spectrum.
///
/// Wedge `d` covers frequency angles `(pi*d/D, pi*(d+1)/D]` modulo `pi`, so each
/// wedge is closed under `w -> -w`. Bins on a boundary go to the lower index,
/// angle 0 goes to wedge 0, and DC plus the Nyquist row and column are pinned
/// to wedge 0.
pub fn wedge_of_bin(ky: usize, kx: usize, rows: usize, cols: usize, directions: usize) -> usize {
    let nyquist_row = rows % 2 == 0 && ky == rows / 2;
    let nyquist_col = cols % 2 == 0 && kx == cols / 2;
    if (ky == 0 && kx == 0) || nyquist_row || nyquist_col {
        return 0;
    }
    let fy = signed_bin(ky, rows) as f64 / rows as f64;
    let fx = signed_bin(kx, cols) as f64 / cols as f64;
    let mut angle = fy.atan2(fx);
    if angle < 0.0 {
        angle += PI;
    }
    if angle >= PI {
        angle -= PI;
    }
    let t = angle / (PI / directions as f64);
    let nearest = t.round();
    if (t - nearest).abs() < 1e-9 {
        let b = nearest as usize;
        return if b == 0 || b >= directions { 0 } else { b - 1 };
    }
    (t.floor() as usize).min(directions - 1)
}

/// Per-bin wedge assignment, row-major.
pub fn wedge_map(rows: usize, cols: usize, directions: usize) -> Vec<u8> {
    let mut map = Vec::with_capacity(rows * cols);
    for ky in 0..rows {
        for kx in 0..cols {
            map.push(wedge_of_bin(ky, kx, rows, cols, directions) as u8);
        }
    }
    map
}

/// `(row_step, col_step)` used to critically sample wedge `wedge` (0-based).
///
/// Wedges centered within pi/4 of the vertical frequency axis keep every
/// `D/2`-th row and every other column; the rest swap the roles.
pub fn decimation_steps(wedge: usize, directions: usize) -> (usize, usize) {
    let center = PI * (wedge as f64 + 0.5) / directions as f64;
    let half = directions / 2;
    if (center - FRAC_PI_2).abs() <= FRAC_PI_4 + 1e-12 {
        (half, 2)
    } else {
        (2, half)
    }
}

struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            col_fwd: planner.plan_fft_forward(rows),
            row_inv: planner.plan_fft_inverse(cols),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    /// Unnormalized in-place 2D transform in natural (non-transposed) layout.
    fn process(&self, buf: &mut [Complex64], inverse: bool) {
        let (row_fft, col_fft) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        for row in buf.chunks_exact_mut(self.cols) {
            row_fft.process(row);
        }
        let mut column = vec![Complex64::default(); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                column[r] = buf[r * self.cols + c];
            }
            col_fft.process(&mut column);
            for r in 0..self.rows {
                buf[r * self.cols + c] = column[r];
            }
        }
    }
}

/// Splits `detail` into `directions` orientation subbands.
///
/// Undecimated output keeps the input size. Critically sampled output
/// decimates each wedge by a total factor of `directions` (see
/// [`decimation_steps`]), which needs both sides divisible by `max(D/2, 2)`.
pub fn dfb_decompose(detail: &Matrix, directions: usize, critically_sampled: bool) -> Result<Vec<Matrix>> {
    check_directions(directions)?;
    let (rows, cols) = (detail.rows(), detail.cols());
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension("empty detail image".into()));
    }
    if critically_sampled {
        let step = (directions / 2).max(2);
        if rows % step != 0 || cols % step != 0 {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} detail cannot be critically sampled into {directions} directions \
                 (sides must be multiples of {step})"
            )));
        }
    }

    let fft = Fft2::new(rows, cols);
    let mut spectrum: Vec<Complex64> = detail
        .as_slice()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft.process(&mut spectrum, false);

    let map = wedge_map(rows, cols, directions);
    let scale = 1.0 / (rows * cols) as f64;
    let mut out = Vec::with_capacity(directions);
    let mut buf = vec![Complex64::default(); rows * cols];
    for wedge in 0..directions {
        for ((b, s), &w) in buf.iter_mut().zip(&spectrum).zip(&map) {
            *b = if w as usize == wedge { *s } else { Complex64::default() };
        }
        fft.process(&mut buf, true);
        let real: Vec<f64> = buf.iter().map(|z| z.re * scale).collect();
        let band = Matrix::from_vec(rows, cols, real)?;
        out.push(if critically_sampled {
            let (rs, cs) = decimation_steps(wedge, directions);
            band.decimate(rs, cs)
        } else {
            band
        });
    }
    Ok(out)
}
