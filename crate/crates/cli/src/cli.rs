use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "orthobench",
    version,
    about = "Measure how differently prompt corpora cover semantic space"
)]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run corpus loading, embedding, grid search, labeling and reporting.
    Pipeline(PipelineArgs),
    /// Per-cluster, per-corpus and total sample sizes.
    SampleSize(SampleSizeArgs),
    /// Prompt-length outlier filtering.
    Filter(FilterArgs),
    /// Reduce an embedding file to 2D coordinates.
    Reduce(ReduceArgs),
    /// k-means with silhouette and elbow k selection on 2D coordinates.
    Cluster(ClusterArgs),
    /// Run the configuration grid from a config file and print the selection.
    Grid(GridArgs),
    /// Label clusters from exemplar prompts.
    Label(LabelArgs),
    /// Frequency table, scatter plot and length densities for a clustering.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigOverrides {
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Read `cluster_id,label` assignments instead of calling a label service.
    #[arg(long)]
    pub labels_from_file: Option<PathBuf>,
    /// `auto` or a config id to force as the winner.
    #[arg(long)]
    pub winner: Option<String>,
    /// Run grid cells one at a time for uncontended timings.
    #[arg(long)]
    pub bench_serial: bool,
    /// `auto` or a fixed k.
    #[arg(long)]
    pub k: Option<String>,
    /// Bootstrap resamples per trial.
    #[arg(long)]
    pub bootstrap_samples: Option<usize>,
    /// k-means restarts per k.
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Run configuration (TOML).
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    /// Print a machine-readable summary.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    /// Write the grid table here.
    #[arg(long = "table")]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct SampleSizeArgs {
    /// Effect size (Cohen's d).
    #[arg(long, visible_alias = "effect-size", default_value_t = 0.5)]
    pub d: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    pub power: f64,
    /// `one` or `two`.
    #[arg(long, default_value = "two")]
    pub tails: String,
    /// Skip the power calculation and use this per-cluster size.
    #[arg(long)]
    pub n_per_cluster: Option<usize>,
    #[arg(long, default_value_t = 15)]
    pub k_max: usize,
    #[arg(long, default_value_t = 1.0)]
    pub multiplier: f64,
    /// Number of corpora.
    #[arg(long, default_value_t = 5)]
    pub benchmarks: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Corpus file, optionally tagged `ID=PATH`. Repeatable.
    #[arg(long = "corpus", required = true)]
    pub corpus: Vec<String>,
    /// jsonl, csv or tsv.
    #[arg(long, default_value = "jsonl")]
    pub format: String,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// iqr or zscore.
    #[arg(long, default_value = "zscore")]
    pub method: String,
    /// pooled or per-corpus.
    #[arg(long, default_value = "pooled")]
    pub scope: String,
    /// Write retained prompts as JSON lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    /// Embedding vector file.
    #[arg(long)]
    pub vectors: PathBuf,
    /// umap or tsne.
    #[arg(long, default_value = "umap")]
    pub method: String,
    #[arg(long, default_value_t = 15)]
    pub n_neighbors: usize,
    #[arg(long, default_value_t = 0.1)]
    pub min_dist: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 100.0)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    /// Skip L2 normalization of the vectors.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coordinates table (`id,x,y`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Coordinates table (`id,x,y`).
    #[arg(long)]
    pub coords: PathBuf,
    /// `auto` or a fixed k.
    #[arg(long, default_value = "auto")]
    pub k: String,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 15)]
    pub k_max: usize,
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Bootstrap resamples for the chosen k (0 disables).
    #[arg(long, default_value_t = 1000)]
    pub bootstrap_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Assignments table (`id,cluster`).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub coords: PathBuf,
    /// Assignments table (`id,cluster`).
    #[arg(long)]
    pub assignments: PathBuf,
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    #[arg(long, default_value_t = 4)]
    pub exemplars: usize,
    /// nearest-centroid or boundary.
    #[arg(long, default_value = "nearest-centroid")]
    pub rule: String,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the service token.
    #[arg(long)]
    pub token_env: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: usize,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    #[arg(long)]
    pub labels_from_file: Option<PathBuf>,
    /// Taxonomy file (default: bundled).
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Labels table (`cluster_id,label,...`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub coords: PathBuf,
    #[arg(long)]
    pub assignments: PathBuf,
    /// `cluster_id,label` table.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Fixed KDE bandwidth (default: Silverman's rule).
    #[arg(long)]
    pub kde_bandwidth: Option<f64>,
    #[arg(long, default_value_t = 512)]
    pub kde_grid_size: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}
