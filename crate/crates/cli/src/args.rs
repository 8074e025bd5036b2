use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Texture image retrieval: decomposition, features, classifiers and evaluation.
#[derive(Debug, Parser)]
#[command(name = "texret", version, about)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Worker threads for per-image work (0 = all cores). Output does not depend on it.
    #[arg(long, default_value_t = 0, global = true)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a dataset directory (PGM tiles plus dataset.tsv) from a manifest or synthetic gratings.
    Ingest(IngestArgs),
    /// Extract features for every dataset image and write a labeled index.
    Index(IndexArgs),
    /// Train a kNN or linear SVM classifier on an index, optionally cross-validated.
    Train(TrainArgs),
    /// Retrieve the top N matches for one query image.
    Query(QueryArgs),
    /// Run every indexed image as a query and report average retrieval rates.
    Evaluate(EvaluateArgs),
    /// Dump the subbands of one image as binary files.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
pub struct IngestArgs {
    /// Manifest: optional `#tile=<px>` first line, then `<id>\t<label>\t<path>` lines.
    #[arg(long, group = "source")]
    pub manifest: Option<PathBuf>,

    /// Synthetic grating dataset, `<classes>x<tiles>@<size>`, e.g. `8x16@128`.
    #[arg(long, group = "source", value_name = "SPEC")]
    pub synthetic: Option<String>,

    /// Seed for the synthetic generator.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DecompArgs {
    /// Pyramid levels.
    #[arg(long = "L", default_value_t = 3)]
    pub levels: usize,

    /// Directions per level, finest first (`8,8,8`); a single value applies to every level.
    #[arg(long = "D", default_value = "8", value_delimiter = ',')]
    pub directions: Vec<usize>,

    /// Critically sample the directional subbands.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, value_name = "BOOL")]
    pub sampled: bool,

    /// Base smoothing sigma in pixels.
    #[arg(long, default_value_t = 1.0)]
    pub sigma0: f64,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Dataset directory (with dataset.tsv) or a manifest file.
    #[arg(long)]
    pub dataset: PathBuf,

    /// Feature method: GGD1 (moments), GGD2 (maximum likelihood) or E (energy).
    #[arg(long, default_value = "GGD1")]
    pub method: String,

    #[command(flatten)]
    pub decomp: DecompArgs,

    /// Output index file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifierArgs {
    /// Number of neighbors for kNN.
    #[arg(long, default_value_t = 1)]
    pub k: usize,

    /// kNN metric, KLD or ED; defaults to KLD for GGD features and ED for energy.
    #[arg(long)]
    pub metric: Option<String>,

    /// Leave the approximation subband out of KLD sums.
    #[arg(long)]
    pub no_approx_term: bool,

    /// SVM regularization constant.
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,

    /// SVM training epochs.
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training index file.
    #[arg(long)]
    pub index: PathBuf,

    /// Classifier: knn or svm.
    #[arg(long, default_value = "knn")]
    pub algo: String,

    #[command(flatten)]
    pub classifier: ClassifierArgs,

    /// Cross-validation folds for the reported accuracy (0 skips it).
    #[arg(long, default_value_t = 10)]
    pub cv: usize,

    /// Seed for the SVM shuffle and the fold split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("query").required(true))]
pub struct QueryArgs {
    /// Index to search.
    #[arg(long)]
    pub index: PathBuf,

    /// Model file, required by the ml scheme.
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Query image (PGM/PPM/PNG).
    #[arg(long, group = "query")]
    pub image: Option<PathBuf>,

    /// Use the indexed image with this id as the query.
    #[arg(long, group = "query")]
    pub id: Option<String>,

    /// Number of results.
    #[arg(long = "N", default_value_t = 15)]
    pub n: usize,

    /// Ranking metric, KLD or ED; defaults to the one paired with the index method.
    #[arg(long)]
    pub metric: Option<String>,

    /// Leave the approximation subband out of KLD sums.
    #[arg(long)]
    pub no_approx_term: bool,

    /// trad ranks the whole index; ml ranks only the predicted class.
    #[arg(long, default_value = "trad")]
    pub scheme: String,

    /// Keep the query's own index entry (with --id) in the results.
    #[arg(long)]
    pub include_self: bool,

    /// Write results here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true))]
pub struct EvaluateArgs {
    /// Index file to evaluate (its method only).
    #[arg(long, group = "input")]
    pub index: Option<PathBuf>,

    /// Dataset directory or manifest; features are extracted per method.
    #[arg(long, group = "input")]
    pub dataset: Option<PathBuf>,

    /// Schemes: trad, knn, svm or all (comma separated).
    #[arg(long, default_value = "all", value_delimiter = ',')]
    pub scheme: Vec<String>,

    /// Feature methods with --dataset: GGD1, GGD2, E or all (comma separated).
    #[arg(long, default_value = "all", value_delimiter = ',')]
    pub method: Vec<String>,

    #[command(flatten)]
    pub decomp: DecompArgs,

    /// Number of retrieved images per query.
    #[arg(long = "N", default_value_t = 15)]
    pub n: usize,

    #[command(flatten)]
    pub classifier: ClassifierArgs,

    /// Ranking metric, KLD or ED; defaults to the one paired with each method.
    #[arg(long = "rank-metric")]
    pub rank_metric: Option<String>,

    /// Training images per class for the ML schemes (each class keeps one image out).
    #[arg(long, default_value_t = 15)]
    pub train_per_class: usize,

    /// Cross-validation folds for the reported accuracy of ML schemes (0 skips it).
    #[arg(long, default_value_t = 10)]
    pub cv: usize,

    /// Query only images outside the training split.
    #[arg(long)]
    pub held_out_only: bool,

    /// Rank only training-split images.
    #[arg(long)]
    pub pool_training_only: bool,

    /// Keep each query's own entry in its results.
    #[arg(long)]
    pub include_self: bool,

    /// Hide each query's own entry from the kNN vote.
    #[arg(long)]
    pub knn_exclude_self: bool,

    /// Seed for the training split, folds and SVM shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Report CSV.
    #[arg(long)]
    pub out: PathBuf,

    /// Directory for per-query CSVs, one per scheme and method.
    #[arg(long)]
    pub per_query: Option<PathBuf>,

    /// Compare a baseline with ML schemes, e.g. `--compare trad ml`.
    #[arg(long, num_args = 2, value_names = ["BASELINE", "SCHEMES"])]
    pub compare: Option<Vec<String>>,

    /// CSV file for the comparison table.
    #[arg(long)]
    pub compare_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Image to decompose.
    #[arg(long)]
    pub image: PathBuf,

    #[command(flatten)]
    pub decomp: DecompArgs,

    /// Output directory for `.rctp` subband files.
    #[arg(long)]
    pub out: PathBuf,
}
