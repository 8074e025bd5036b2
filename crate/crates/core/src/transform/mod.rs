//! Multiscale, multidirectional decomposition: a redundant Laplacian pyramid
//! whose detail levels are split by a directional filter bank.

mod dfb;
mod pyramid;

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

pub use dfb::{check_directions, decimation_steps, dfb_decompose, wedge_map, wedge_of_bin, ALLOWED_DIRECTIONS};
pub use pyramid::{level_sigma, pseudo_gaussian_kernel, rlp_decompose, smooth, RlpPyramid};

use crate::error::{Error, Result};
use crate::ingest::GrayImage;
use crate::matrix::Matrix;

/// Decomposition parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RctPlusConfig {
    /// Number of pyramid levels `L`.
    pub levels: usize,
    /// Directions per level, finest level first. Length must equal `levels`.
    pub directions: Vec<usize>,
    /// Base smoothing sigma in pixels; level `l` uses `sigma0 * 2^(l-1)`.
    pub sigma0: f64,
    pub critically_sampled: bool,
}

impl Default for RctPlusConfig {
    fn default() -> Self {
        RctPlusConfig {
            levels: 3,
            directions: vec![8, 8, 8],
            sigma0: 1.0,
            critically_sampled: true,
        }
    }
}

impl RctPlusConfig {
    pub fn new(directions: Vec<usize>, critically_sampled: bool) -> Self {
        RctPlusConfig {
            levels: directions.len(),
            directions,
            sigma0: 1.0,
            critically_sampled,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 {
            return Err(Error::Config("at least one scale level is required".into()));
        }
        if self.directions.len() != self.levels {
            return Err(Error::Config(format!(
                "{} direction counts given for {} levels",
                self.directions.len(),
                self.levels
            )));
        }
        for &d in &self.directions {
            check_directions(d)?;
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::Config(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        Ok(())
    }

    /// Number of subbands produced, approximation included.
    pub fn subband_count(&self) -> usize {
        self.directions.iter().sum::<usize>() + 1
    }

    /// Canonical subband order: scale 1 directions 1..D_1, ..., approximation last.
    pub fn layout(&self) -> Vec<SubbandPosition> {
        let mut layout = Vec::with_capacity(self.subband_count());
        for (l, &d) in self.directions.iter().enumerate() {
            for dir in 1..=d {
                layout.push(SubbandPosition::Directional {
                    scale: l + 1,
                    direction: dir,
                });
            }
        }
        layout.push(SubbandPosition::Approximation);
        layout
    }
}

/// Where a subband sits in the decomposition. Scales and directions are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubbandPosition {
    Directional { scale: usize, direction: usize },
    Approximation,
}

impl SubbandPosition {
    pub fn is_approximation(&self) -> bool {
        matches!(self, SubbandPosition::Approximation)
    }
}

impl fmt::Display for SubbandPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubbandPosition::Directional { scale, direction } => write!(f, "C{scale},{direction}"),
            SubbandPosition::Approximation => f.write_str("CL"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subband {
    pub position: SubbandPosition,
    pub coefficients: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RctPlusDecomposition {
    pub config: RctPlusConfig,
    /// Subbands in canonical order (see [`RctPlusConfig::layout`]).
    pub subbands: Vec<Subband>,
}

impl RctPlusDecomposition {
    pub fn layout(&self) -> Vec<SubbandPosition> {
        self.subbands.iter().map(|s| s.position).collect()
    }

    /// Directional subbands of one scale level, in direction order.
    pub fn level(&self, scale: usize) -> impl Iterator<Item = &Subband> {
        self.subbands.iter().filter(move |s| {
            matches!(s.position, SubbandPosition::Directional { scale: l, .. } if l == scale)
        })
    }

    pub fn approximation(&self) -> &Subband {
        self.subbands.last().expect("decomposition always ends with the approximation")
    }
}

/// Full decomposition of one image.
pub fn rct_plus(img: &GrayImage, config: &RctPlusConfig) -> Result<RctPlusDecomposition> {
    config.validate()?;
    img.check_decomposable()?;
    let pyramid = rlp_decompose(img, config.levels, config.sigma0)?;
    let mut subbands = Vec::with_capacity(config.subband_count());
    for (l, (detail, &d)) in pyramid.details.iter().zip(&config.directions).enumerate() {
        let bands = dfb_decompose(detail, d, config.critically_sampled)?;
        for (dir, coefficients) in bands.into_iter().enumerate() {
            subbands.push(Subband {
                position: SubbandPosition::Directional {
                    scale: l + 1,
                    direction: dir + 1,
                },
                coefficients,
            });
        }
    }
    subbands.push(Subband {
        position: SubbandPosition::Approximation,
        coefficients: pyramid.approximation,
    });
    Ok(RctPlusDecomposition {
        config: config.clone(),
        subbands,
    })
}

const DUMP_MAGIC: &str = "RCTP1";

/// Writes each subband to `<dir>/<index>_<position>.rctp`: an ASCII header line
/// `RCTP1 <scale> <dir> <K> <M>` followed by `K*M` little-endian f64 values.
/// The approximation is written with scale 0 and direction 0.
pub fn dump_decomposition(decomp: &RctPlusDecomposition, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(decomp.subbands.len());
    for (i, band) in decomp.subbands.iter().enumerate() {
        let (scale, direction) = match band.position {
            SubbandPosition::Directional { scale, direction } => (scale, direction),
            SubbandPosition::Approximation => (0, 0),
        };
        let m = &band.coefficients;
        let mut bytes =
            format!("{DUMP_MAGIC} {scale} {direction} {} {}\n", m.rows(), m.cols()).into_bytes();
        for v in m.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(format!("{i:03}_s{scale}_d{direction}.rctp"));
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads one subband dump file back.
pub fn read_subband_dump(path: impl AsRef<Path>) -> Result<Subband> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != DUMP_MAGIC {
        return Err(Error::format(1, "bad subband dump header"));
    }
    let nums: Vec<usize> = fields[1..]
        .iter()
        .map(|f| f.parse().map_err(|_| Error::format(1, "bad header number")))
        .collect::<Result<_>>()?;
    let (scale, direction, rows, cols) = (nums[0], nums[1], nums[2], nums[3]);
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    if raw.len() != rows * cols * 8 {
        return Err(Error::format(2, format!("expected {} bytes of data, found {}", rows * cols * 8, raw.len())));
    }
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let position = if scale == 0 {
        SubbandPosition::Approximation
    } else {
        SubbandPosition::Directional { scale, direction }
    };
    Ok(Subband {
        position,
        coefficients: Matrix::from_vec(rows, cols, data)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize) -> GrayImage {
        GrayImage::from_fn(h, w, |r, c| {
            let (r, c) = (r as f64, c as f64);
            100.0 + 30.0 * (0.3 * c + 0.1 * r).sin() + 10.0 * (0.05 * r * c).cos()
        })
    }

    #[test]
    fn subband_counts() {
        let img = textured(128, 128);
        let d = rct_plus(&img, &RctPlusConfig::new(vec![8, 4, 4], true)).unwrap();
        assert_eq!(d.subbands.len(), 17);
        let d = rct_plus(&img, &RctPlusConfig::default()).unwrap();
        assert_eq!(d.subbands.len(), 25);
        assert_eq!(d.layout(), d.config.layout());
        assert_eq!(d.approximation().coefficients.len(), 128 * 128);
    }

    #[test]
    fn constant_image() {
        let img = GrayImage::from_fn(64, 64, |_, _| 77.0);
        let d = rct_plus(&img, &RctPlusConfig::default()).unwrap();
        for band in &d.subbands[..24] {
            assert!(band.coefficients.as_slice().iter().all(|v| v.abs() < 1e-9));
        }
        assert!(d.approximation().coefficients.as_slice().iter().all(|v| (v - 77.0).abs() < 1e-9));
    }

    #[test]
    fn config_validation() {
        let mut c = RctPlusConfig::default();
        c.directions = vec![8, 8];
        assert!(c.validate().is_err());
        assert!(RctPlusConfig::new(vec![8, 3, 8], true).validate().is_err());
        let mut c = RctPlusConfig::default();
        c.sigma0 = 0.0;
        assert!(c.validate().is_err());
        assert!(rct_plus(&textured(16, 64), &RctPlusConfig::default()).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let img = textured(32, 32);
        let d = rct_plus(&img, &RctPlusConfig::new(vec![4], true)).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let paths = dump_decomposition(&d, tmp.path()).unwrap();
        assert_eq!(paths.len(), 5);
        for (p, band) in paths.iter().zip(&d.subbands) {
            assert_eq!(&read_subband_dump(p).unwrap(), band);
        }
        let raw = fs::read(&paths[0]).unwrap();
        assert!(raw.starts_with(b"RCTP1 1 1 16 "));
    }
}
