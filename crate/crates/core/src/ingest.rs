//! Image loading, tiling into labeled datasets, and synthetic grating corpora.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Smallest side length accepted by the decomposition.
pub const MIN_DECOMPOSITION_SIDE: usize = 32;

/// A single-channel image with real-valued intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pixels: Matrix,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        Self::from_matrix(Matrix::from_vec(height, width, pixels)?)
    }

    pub fn from_matrix(pixels: Matrix) -> Result<Self> {
        if pixels.rows() == 0 || pixels.cols() == 0 {
            return Err(Error::Dimension("image must be non-empty".into()));
        }
        if pixels.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("image contains non-finite pixels".into()));
        }
        Ok(GrayImage { pixels })
    }

    pub fn from_fn(height: usize, width: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        GrayImage {
            pixels: Matrix::from_fn(height, width, f),
        }
    }

    pub fn height(&self) -> usize {
        self.pixels.rows()
    }

    pub fn width(&self) -> usize {
        self.pixels.cols()
    }

    pub fn pixels(&self) -> &[f64] {
        self.pixels.as_slice()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[(row, col)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.pixels
    }

    pub fn into_matrix(self) -> Matrix {
        self.pixels
    }

    pub(crate) fn check_decomposable(&self) -> Result<()> {
        if self.height() < MIN_DECOMPOSITION_SIDE || self.width() < MIN_DECOMPOSITION_SIDE {
            return Err(Error::Dimension(format!(
                "{}x{} image is below the {MIN_DECOMPOSITION_SIDE}x{MIN_DECOMPOSITION_SIDE} minimum",
                self.height(),
                self.width()
            )));
        }
        Ok(())
    }
}

/// BT.601 luminance, rounded to the nearest integer level.
pub fn luminance(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)).round()
}

/// Loads an 8-bit grayscale or RGB PNG/PGM file.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::ImageFormat {
            path: path.to_owned(),
            reason: other.to_string(),
        },
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let pixels: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .into_raw()
            .chunks_exact(3)
            .map(|px| luminance(px[0], px[1], px[2]))
            .collect(),
        other => {
            return Err(Error::ImageFormat {
                path: path.to_owned(),
                reason: format!("unsupported pixel layout {:?}", other.color()),
            })
        }
    };
    GrayImage::new(height, width, pixels)
}

/// Writes a binary 8-bit PGM (P5); values are rounded and clamped to [0, 255].
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend(img.pixels().iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Splits `img` into non-overlapping square tiles in row-major grid order.
pub fn tile_image(img: &GrayImage, tile_size: usize) -> Result<Vec<GrayImage>> {
    if tile_size == 0 || img.height() % tile_size != 0 || img.width() % tile_size != 0 {
        return Err(Error::Dimension(format!(
            "tile size {tile_size} does not divide {}x{}",
            img.height(),
            img.width()
        )));
    }
    let (grid_rows, grid_cols) = (img.height() / tile_size, img.width() / tile_size);
    let mut tiles = Vec::with_capacity(grid_rows * grid_cols);
    for gr in 0..grid_rows {
        for gc in 0..grid_cols {
            let m = img
                .as_matrix()
                .sub_matrix(gr * tile_size, gc * tile_size, tile_size, tile_size);
            tiles.push(GrayImage { pixels: m });
        }
    }
    Ok(tiles)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub label: String,
    pub path: PathBuf,
}

/// A list of labeled image files, optionally tiled on load.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub tile: Option<usize>,
}

impl DatasetManifest {
    /// Parses `<id>\t<label>\t<path>` lines with an optional leading `#tile=<N>`.
    /// Relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut manifest = DatasetManifest::default();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                match rest.strip_prefix("tile=") {
                    Some(n) if i == 0 => {
                        let n: usize = n
                            .trim()
                            .parse()
                            .map_err(|_| Error::format(lineno, "bad tile size"))?;
                        if n == 0 {
                            return Err(Error::format(lineno, "tile size must be positive"));
                        }
                        manifest.tile = Some(n);
                    }
                    Some(_) => return Err(Error::format(lineno, "#tile= must be the first line")),
                    None => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, label, path] = fields[..] else {
                return Err(Error::format(
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            };
            if id.is_empty() || label.is_empty() || path.is_empty() {
                return Err(Error::format(lineno, "empty field"));
            }
            let path = Path::new(path);
            let path = if path.is_relative() {
                base_dir.join(path)
            } else {
                path.to_owned()
            };
            manifest.entries.push(ManifestEntry {
                id: id.to_owned(),
                label: label.to_owned(),
                path,
            });
        }
        Ok(manifest)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or_else(|| Path::new(".")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(n) = self.tile {
            out.push_str(&format!("#tile={n}\n"));
        }
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.id, e.label, e.path.display()));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Manifest("manifest has no entries".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate image id {:?}", e.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: String,
    pub label: String,
    pub image: GrayImage,
}

/// Class-labeled images of identical size.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<LabeledImage>,
    /// Distinct labels in first-appearance order.
    pub classes: Vec<String>,
}

impl Dataset {
    pub fn new(images: Vec<LabeledImage>) -> Result<Self> {
        let Some(first) = images.first() else {
            return Err(Error::Manifest("dataset is empty".into()));
        };
        let dims = (first.image.height(), first.image.width());
        let mut classes: Vec<String> = Vec::new();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut ids = HashSet::new();
        for img in &images {
            if (img.image.height(), img.image.width()) != dims {
                return Err(Error::Dimension(format!(
                    "image {} is {}x{}, expected {}x{}",
                    img.id,
                    img.image.height(),
                    img.image.width(),
                    dims.0,
                    dims.1
                )));
            }
            if !ids.insert(img.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate image id {:?}", img.id)));
            }
            let count = counts.entry(img.label.as_str()).or_insert(0);
            if *count == 0 {
                classes.push(img.label.clone());
            }
            *count += 1;
        }
        if let Some(small) = classes.iter().find(|c| counts[c.as_str()] < 2) {
            return Err(Error::Manifest(format!(
                "class {small:?} has fewer than 2 images"
            )));
        }
        Ok(Dataset { images, classes })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Writes every image as PGM into `dir` and returns the matching manifest.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.images.len());
        let mut names = std::collections::HashSet::new();
        for img in &self.images {
            let file_name = format!("{}.pgm", sanitize_file_stem(&img.id));
            if !names.insert(file_name.clone()) {
                return Err(Error::Invariant(format!("image ids collide on file name {file_name}")));
            }
            save_pgm(&img.image, dir.join(&file_name))?;
            entries.push(ManifestEntry {
                id: img.id.clone(),
                label: img.label.clone(),
                path: PathBuf::from(file_name),
            });
        }
        let manifest = DatasetManifest {
            entries,
            tile: None,
        };
        let listing = dir.join("dataset.tsv");
        let mut f = fs::File::create(&listing).map_err(|e| Error::io(&listing, e))?;
        f.write_all(manifest.to_text().as_bytes())
            .map_err(|e| Error::io(&listing, e))?;
        Ok(manifest)
    }
}

fn sanitize_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Loads and (optionally) tiles every manifest entry. Tile ids are `<id>#<row>_<col>`.
pub fn build_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    manifest.validate()?;
    let mut images = Vec::new();
    for entry in &manifest.entries {
        let img = load_image(&entry.path)?;
        match manifest.tile {
            None => images.push(LabeledImage {
                id: entry.id.clone(),
                label: entry.label.clone(),
                image: img,
            }),
            Some(size) => {
                let grid_cols = img.width() / size.max(1);
                let tiles = tile_image(&img, size).map_err(|e| {
                    Error::Manifest(format!("{}: {e}", entry.path.display()))
                })?;
                for (k, tile) in tiles.into_iter().enumerate() {
                    images.push(LabeledImage {
                        id: format!("{}#{}_{}", entry.id, k / grid_cols, k % grid_cols),
                        label: entry.label.clone(),
                        image: tile,
                    });
                }
            }
        }
    }
    Dataset::new(images)
}

/// Label used for synthetic class `c`.
pub fn synthetic_label(class: usize) -> String {
    format!("grating{class:02}")
}

/// Oriented sinusoidal gratings with additive uniform noise, one class per orientation.
///
/// Class `c` has orientation `c*pi/num_classes`, frequency `0.08 + 0.02*(c mod 4)`
/// cycles/pixel, amplitude 60 around mean 128, and noise uniform in [-20, 20].
/// Every tile draws its own phase and noise from a ChaCha8 stream seeded by `seed`.
pub fn generate_synthetic_dataset(
    num_classes: usize,
    tiles_per_class: usize,
    tile_size: usize,
    seed: u64,
) -> Result<Dataset> {
    if num_classes == 0 || num_classes > 16 {
        return Err(Error::Config(format!(
            "synthetic class count must be in 1..=16, got {num_classes}"
        )));
    }
    if tiles_per_class < 2 || tile_size == 0 {
        return Err(Error::Config(
            "synthetic datasets need at least 2 tiles per class and a positive tile size".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(num_classes * tiles_per_class);
    for c in 0..num_classes {
        let theta = c as f64 * std::f64::consts::PI / num_classes as f64;
        let freq = 0.08 + 0.02 * (c % 4) as f64;
        let (kx, ky) = (freq * theta.cos(), freq * theta.sin());
        for t in 0..tiles_per_class {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let mut pixels = Vec::with_capacity(tile_size * tile_size);
            for y in 0..tile_size {
                for x in 0..tile_size {
                    let arg = std::f64::consts::TAU * (kx * x as f64 + ky * y as f64) + phase;
                    let noise = rng.random_range(-20.0..=20.0);
                    pixels.push(128.0 + 60.0 * arg.sin() + noise);
                }
            }
            images.push(LabeledImage {
                id: format!("{}_{t:03}", synthetic_label(c)),
                label: synthetic_label(c),
                image: GrayImage::new(tile_size, tile_size, pixels)?,
            });
        }
    }
    Dataset::new(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> GrayImage {
        GrayImage::from_fn(h, w, |r, c| (r * w + c) as f64)
    }

    #[test]
    fn luminance_examples() {
        assert_eq!(luminance(255, 255, 255), 255.0);
        assert_eq!(luminance(100, 50, 200), 82.0);
        assert_eq!(luminance(0, 0, 0), 0.0);
    }

    #[test]
    fn tiling_grid_order() {
        let img = ramp(4, 4);
        let tiles = tile_image(&img, 2).unwrap();
        assert_eq!(tiles.len(), 4);
        assert_eq!(tiles[0].pixels(), &[0.0, 1.0, 4.0, 5.0]);
        assert_eq!(tiles[1].pixels(), &[2.0, 3.0, 6.0, 7.0]);
        assert_eq!(tiles[3].pixels(), &[10.0, 11.0, 14.0, 15.0]);
    }

    #[test]
    fn tiling_counts() {
        assert_eq!(tile_image(&ramp(512, 512), 128).unwrap().len(), 16);
        let one = tile_image(&ramp(128, 128), 128).unwrap();
        assert_eq!(one, vec![ramp(128, 128)]);
        assert!(matches!(
            tile_image(&ramp(100, 128), 64),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn manifest_parsing() {
        let text = "#tile=128\na\tbark\timgs/a.pgm\nb\tbark\t/abs/b.png\n";
        let m = DatasetManifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.tile, Some(128));
        assert_eq!(m.entries[0].path, PathBuf::from("/data/imgs/a.pgm"));
        assert_eq!(m.entries[1].path, PathBuf::from("/abs/b.png"));

        let err = DatasetManifest::parse("a\tb\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }));
        let err = DatasetManifest::parse("a\tb\tc\n#tile=4\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }));
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let err = build_dataset(&DatasetManifest::default()).unwrap_err();
        assert!(matches!(err, Error::Manifest(_)));
    }

    #[test]
    fn dataset_rejects_singleton_class() {
        let imgs = vec![
            LabeledImage { id: "a".into(), label: "x".into(), image: ramp(4, 4) },
            LabeledImage { id: "b".into(), label: "x".into(), image: ramp(4, 4) },
            LabeledImage { id: "c".into(), label: "y".into(), image: ramp(4, 4) },
        ];
        assert!(matches!(Dataset::new(imgs), Err(Error::Manifest(_))));
    }

    #[test]
    fn synthetic_shape_and_determinism() {
        let small = generate_synthetic_dataset(1, 2, 64, 99).unwrap();
        assert_eq!(small.classes.len(), 1);
        assert_eq!(small.len(), 2);
        assert!(small.images.iter().all(|i| i.image.height() == 64 && i.image.width() == 64));

        let a = generate_synthetic_dataset(8, 16, 128, 7).unwrap();
        let b = generate_synthetic_dataset(8, 16, 128, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic_dataset(8, 16, 128, 8).unwrap());
    }

    #[test]
    fn synthetic_class_means_near_128() {
        let ds = generate_synthetic_dataset(8, 16, 128, 7).unwrap();
        assert_eq!(ds.len(), 128);
        for class in &ds.classes {
            let members: Vec<_> = ds.images.iter().filter(|i| &i.label == class).collect();
            let total: f64 = members.iter().map(|i| i.image.as_matrix().mean()).sum();
            let mean = total / members.len() as f64;
            assert!((118.0..=138.0).contains(&mean), "{class}: {mean}");
        }
    }

    #[test]
    fn synthetic_rejects_too_many_classes() {
        assert!(generate_synthetic_dataset(17, 2, 32, 0).is_err());
    }
}
