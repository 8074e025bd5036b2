//! Texture image retrieval with contourlet-style subband statistics.
//!
//! The pipeline runs in two phases. Offline, every database image is
//! decomposed by a redundant Laplacian pyramid followed by a directional
//! filter bank ([`transform`]), each subband is summarized by a generalized
//! Gaussian fit or by energy moments ([`features`]), and the labeled vectors
//! are stored in a [`LabeledIndex`]. Online, a query is either ranked against
//! the whole index or first classified ([`classify`]) and then ranked only
//! against images of the predicted class ([`retrieval`]). [`evaluation`]
//! measures average retrieval rates over a database.

pub mod classify;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ggd;
pub mod ingest;
pub mod matrix;
pub mod retrieval;
pub mod similarity;
pub mod transform;

pub use classify::{Classifier, ClassifierSpec, KnnModel, LinearSvmModel, SvmParams};
pub use error::{Error, Result};
pub use evaluation::{EvalConfig, EvalReport, Scheme};
pub use features::{FeatureMethod, FeatureVector, IndexEntry, LabeledIndex};
pub use ggd::{Estimator, GgdParams};
pub use ingest::{Dataset, DatasetManifest, GrayImage};
pub use matrix::Matrix;
pub use retrieval::{RetrievalParams, RetrievalResult};
pub use similarity::{Metric, Similarity};
pub use transform::{RctPlusConfig, RctPlusDecomposition, Subband, SubbandPosition};
