//! Fixtures shared by the benchmarks. Everything is derived from the seeded
//! synthetic grating generator so runs are comparable across machines.

use texret_core::features::build_index;
use texret_core::ingest::generate_synthetic_dataset;
use texret_core::transform::rct_plus;
use texret_core::{Dataset, FeatureMethod, GrayImage, LabeledIndex, RctPlusConfig};

pub const SEED: u64 = 11;

pub fn dataset(classes: usize, tiles: usize, size: usize) -> Dataset {
    generate_synthetic_dataset(classes, tiles, size, SEED).expect("synthetic dataset")
}

/// One grating tile of `size` pixels square.
pub fn image(size: usize) -> GrayImage {
    dataset(1, 2, size).images.swap_remove(0).image
}

pub fn config() -> RctPlusConfig {
    RctPlusConfig::new(vec![8, 8, 8], true)
}

/// Coefficients of the finest directional subband of a 256 px tile.
pub fn subband_samples() -> Vec<f64> {
    let decomp = rct_plus(&image(256), &config()).expect("decomposition");
    decomp.subbands[0].coefficients.as_slice().to_vec()
}

pub fn index(method: FeatureMethod) -> LabeledIndex {
    build_index(&dataset(8, 16, 64), &config(), method).expect("index")
}
