//! `uroc`: ROC curves, bootstrap bands and fairness metrics from face
//! embeddings or precomputed similarity scores.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use uroc::fairness::{Metric, Side};
use uroc::{BandMode, EmbeddingFormat, Error, ImpostorPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "uroc",
    version,
    args_override_self = true,
    about = "ROC analysis with U-statistic-aware bootstrap bands"
)]
struct Cli {
    /// Worker threads for bootstrap replicates; results do not depend on it.
    #[arg(long, global = true, env = "UROC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Empirical ROC curve with a bootstrap confidence band.
    Roc(RocArgs),
    /// Fairness metrics of per-attribute FAR/FRR with bootstrap bands.
    Fairness(FairnessArgs),
    /// Generate a synthetic embedding dataset.
    Synth(SynthArgs),
    /// Band coverage experiment on synthetic data.
    Coverage(CoverageArgs),
    /// Compute the similarity scores of an embedding dataset.
    Scores(ScoresArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn ext(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Embedding file (CSV, or binary for .bin/.uroc).
    #[arg(long, required_unless_present = "scores", conflicts_with = "scores")]
    pub input: Option<PathBuf>,
    /// Override the embedding format inferred from the extension: csv or binary.
    #[arg(long)]
    pub input_format: Option<EmbeddingFormat>,
    /// Precomputed score CSV (identity_a,identity_b,image_a,image_b,score).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// `identity,attribute` CSV accompanying --scores.
    #[arg(long, requires = "scores")]
    pub attributes: Option<PathBuf>,
    /// Impostor pairs entering the global FAR: all_pairs or same_attribute_only.
    #[arg(long, default_value = "same_attribute_only")]
    pub policy: ImpostorPolicy,
}

#[derive(Debug, Args, Serialize)]
pub struct BootArgs {
    /// FAR grid: `default`, or comma-separated numbers, `log:lo:hi:n`, `lin:lo:hi:n`.
    #[arg(long, default_value = "default")]
    pub alphas: String,
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 200)]
    pub replicates: usize,
    /// Band miscoverage level; the band is nominally 1 - alpha_CI.
    #[arg(long, default_value_t = 0.05)]
    pub alpha_ci: f64,
    /// Master seed of the bootstrap streams.
    #[arg(long, env = "UROC_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    /// Output directory; created once every result has been computed.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Args, Serialize)]
pub struct RocArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    /// Band construction: recentered or naive.
    #[arg(long, default_value = "recentered")]
    pub mode: BandMode,
    /// Also emit one curve per attribute value.
    #[arg(long)]
    pub per_attribute: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct FairnessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    /// Metrics (max_min, max_geomean, log_geomean, gini); all by default.
    #[arg(long, value_delimiter = ',')]
    pub metric: Vec<Metric>,
    /// Sides (FAR, FRR); both by default.
    #[arg(long, value_delimiter = ',')]
    pub side: Vec<Side>,
    /// Fail on zero group rates instead of flooring them.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Number of identities.
    #[arg(long = "K", default_value_t = 100)]
    pub identities: usize,
    /// Images per identity: `n` or `lo-hi`.
    #[arg(long = "n", default_value = "8")]
    pub images: String,
    /// Embedding dimension.
    #[arg(long = "d", default_value_t = 16)]
    pub dim: usize,
    /// Number of attribute values; defaults to the number of --sigma values.
    #[arg(long = "A")]
    pub attributes: Option<usize>,
    /// Noise scale per attribute value, or one value for all.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub sigma: Vec<f64>,
    #[arg(long, env = "UROC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output embedding file.
    #[arg(short, long)]
    #[serde(skip)]
    pub output: PathBuf,
    /// csv or binary; inferred from the extension by default.
    #[arg(long)]
    pub format: Option<EmbeddingFormat>,
}

#[derive(Debug, Args, Serialize)]
pub struct CoverageArgs {
    #[arg(long = "K", default_value_t = 50)]
    pub identities: usize,
    #[arg(long = "n", default_value = "8")]
    pub images: String,
    #[arg(long = "d", default_value_t = 16)]
    pub dim: usize,
    #[arg(long = "A")]
    pub attributes: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub sigma: Vec<f64>,
    #[arg(long, default_value = "same_attribute_only")]
    pub policy: ImpostorPolicy,
    /// Synthetic datasets drawn.
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long = "B", default_value_t = 200)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_ci: f64,
    #[arg(long, default_value = "0.05,0.1,0.2")]
    pub alphas: String,
    /// Genuine and impostor pairs simulated for the true ROC.
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_pairs: usize,
    #[arg(long, env = "UROC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoresArgs {
    /// Embedding file (CSV, or binary for .bin/.uroc).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub input_format: Option<EmbeddingFormat>,
    #[arg(long, default_value = "same_attribute_only")]
    pub policy: ImpostorPolicy,
    /// Output score CSV.
    #[arg(short, long)]
    #[serde(skip)]
    pub output: PathBuf,
    /// Also write the `identity,attribute` CSV needed to reload the scores.
    #[arg(long)]
    #[serde(skip)]
    pub attributes_out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::UndefinedMetric(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(Error::InvalidConfig("--threads must be at least 1".into()));
            }
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start thread pool: {e}")))?
    };
    pool.install(|| match &cli.command {
        Command::Roc(args) => commands::roc(args),
        Command::Fairness(args) => commands::fairness(args),
        Command::Synth(args) => commands::synth(args),
        Command::Coverage(args) => commands::coverage(args),
        Command::Scores(args) => commands::scores(args),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
