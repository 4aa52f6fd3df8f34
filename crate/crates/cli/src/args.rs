use std::path::PathBuf;

use audiodiv::mauve::{ClusterCount, MauveConfig};
use audiodiv::mmd::{Bandwidth, MmdConfig};
use audiodiv::prdc::DEFAULT_K;
use audiodiv::prefstats::Axis;
use audiodiv::{Metric, PoolMethod};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const ORIENTATIONS: &str = "Metric orientations (fixed):
  fad, mmd, mad                                 lower is better
  mauve, precision, recall, density, coverage   higher is better";

#[derive(Debug, Parser)]
#[command(name = "audiodiv", version, about = "Divergence metrics and meta-evaluation for generative audio", after_help = ORIENTATIONS)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Report format on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Leave wall-clock fields out of the report so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Worker threads (1 gives bit-exact reproducibility).
    #[arg(long, global = true, env = "AUDIODIV_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pool a manifest of per-clip frame tensors into one N×d NPY matrix.
    Pool(PoolArgs),
    /// Fréchet distance between Gaussian fits (FAD).
    Fad(PairArgs),
    /// Unbiased MMD² with an RBF kernel.
    Mmd(MmdArgs),
    /// Precision, recall, density and coverage.
    Prdc(PrdcArgs),
    /// MAD = -ln(MAUVE) over k-means histograms.
    Mad(MadArgs),
    /// Score a distortion ladder with one or more metrics.
    Metaeval(MetaevalArgs),
    /// Re-run a ladder evaluation on seeded subsamples of every level.
    Subsample(SubsampleArgs),
    /// Build a Gaussian-noise ladder from a directory of WAV files.
    DegradeNoise(DegradeNoiseArgs),
    /// Build a note-perturbation ladder from a directory of MIDI files.
    DegradeMidi(DegradeMidiArgs),
    /// Bradley-Terry ranking and statistics for pairwise preferences.
    BtRank(BtRankArgs),
    /// Kendall τ-b and its permutation p-value for two vectors.
    Tau(TauArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pool(_) => "pool",
            Command::Fad(_) => "fad",
            Command::Mmd(_) => "mmd",
            Command::Prdc(_) => "prdc",
            Command::Mad(_) => "mad",
            Command::Metaeval(_) => "metaeval",
            Command::Subsample(_) => "subsample",
            Command::DegradeNoise(_) => "degrade-noise",
            Command::DegradeMidi(_) => "degrade-midi",
            Command::BtRank(_) => "bt-rank",
            Command::Tau(_) => "tau",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PoolArgs {
    /// Manifest JSON listing the clips.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long = "pool", default_value = "mean")]
    pub method: PoolMethod,
    /// Output NPY path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PairArgs {
    /// Reference set: N×d NPY matrix or manifest JSON.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Candidate set: N×d NPY matrix or manifest JSON.
    #[arg(long)]
    pub gen: PathBuf,
    /// Pooling for manifest inputs.
    #[arg(long = "pool", default_value = "mean")]
    pub method: PoolMethod,
}

#[derive(Debug, Args, Serialize)]
pub struct MmdOpts {
    /// RBF bandwidth: `median` for the median heuristic or a positive number.
    #[arg(long, default_value = "median")]
    pub bandwidth: String,
    /// Report max(0, MMD²) instead of the signed estimate.
    #[arg(long)]
    pub clamp_negative: bool,
}

impl MmdOpts {
    pub fn config(&self) -> Result<MmdConfig, String> {
        let bandwidth = if self.bandwidth == "median" {
            Bandwidth::MedianHeuristic
        } else {
            let s: f64 = self
                .bandwidth
                .parse()
                .map_err(|_| format!("--bandwidth must be `median` or a number, got `{}`", self.bandwidth))?;
            Bandwidth::Fixed(s)
        };
        Ok(MmdConfig {
            bandwidth,
            clamp_negative: self.clamp_negative,
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MmdArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub mmd: MmdOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct PrdcArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Nearest-neighbour count.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MauveOpts {
    /// Cluster count: `auto` (one per ten points, 2..=500) or an integer.
    #[arg(long, default_value = "auto")]
    pub clusters: String,
    #[arg(long, default_value_t = 5.0)]
    pub scale_c: f64,
    #[arg(long, default_value_t = 25)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    /// Project onto this many principal components before clustering.
    #[arg(long)]
    pub pca_dims: Option<usize>,
}

impl MauveOpts {
    pub fn config(&self, seed: u64) -> Result<MauveConfig, String> {
        let num_clusters = if self.clusters == "auto" {
            ClusterCount::Auto
        } else {
            ClusterCount::Fixed(
                self.clusters
                    .parse()
                    .map_err(|_| format!("--clusters must be `auto` or an integer, got `{}`", self.clusters))?,
            )
        };
        Ok(MauveConfig {
            num_clusters,
            scale_c: self.scale_c,
            grid_size: self.grid_size,
            seed,
            kmeans_restarts: self.restarts,
            max_iters: self.max_iters,
            pca_dims: self.pca_dims,
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MadArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Seed for k-means (required).
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub mauve: MauveOpts,
    /// Also write the divergence curve as CSV (lambda,x,y).
    #[arg(long)]
    pub curve_csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LadderOpts {
    /// Ladder JSON: {"desideratum", "reference", "levels": [{"index", "path"}]}.
    #[arg(long)]
    pub ladder: PathBuf,
    #[arg(long = "pool", default_value = "mean")]
    pub method: PoolMethod,
    /// Use level 1 as the reference set.
    #[arg(long)]
    pub oracle_reference: bool,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[command(flatten)]
    pub mmd: MmdOpts,
    #[command(flatten)]
    pub mauve: MauveOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct MetaevalArgs {
    #[command(flatten)]
    pub ladder: LadderOpts,
    /// Comma-separated metric ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub metrics: Vec<Metric>,
    /// Seed; required when any metric is stochastic (mad, mauve).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SubsampleArgs {
    #[command(flatten)]
    pub ladder: LadderOpts,
    #[arg(long)]
    pub metric: Metric,
    /// Comma-separated subsample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Seed for subsampling and clustering (required).
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct DegradeNoiseArgs {
    /// Directory of .wav clips.
    #[arg(long)]
    pub input: PathBuf,
    /// Output root for the level directories and ladder.json.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated noise standard deviations (default 0, 0.02, …, 0.2).
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct DegradeMidiArgs {
    /// Directory of .mid/.midi files.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated perturbation probabilities (default 0, 0.05, …, 0.5).
    #[arg(long, value_delimiter = ',')]
    pub probs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 6)]
    pub pitch_range: i32,
    #[arg(long, default_value_t = 0.2)]
    pub time_range: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct BtRankArgs {
    /// Preference CSV.
    #[arg(long)]
    pub prefs: PathBuf,
    /// Axes to pool.
    #[arg(long, value_delimiter = ',', default_values = ["fidelity", "musicality"], value_parser = parse_axis)]
    pub axes: Vec<Axis>,
    /// Optional CSV of metric values per system: a `system` column plus one
    /// column per metric. Columns named after a known metric use its
    /// orientation; others must end in `:lower` or `:higher`.
    #[arg(long)]
    pub metric_scores: Option<PathBuf>,
    #[arg(long, default_value_t = audiodiv::prefstats::BT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = audiodiv::prefstats::BT_MAX_ITERS)]
    pub max_iters: usize,
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    s.parse().map_err(|e: audiodiv::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct TauArgs {
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub xs: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub ys: Vec<f64>,
}
