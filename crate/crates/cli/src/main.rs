use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

/// Tool version and report schema version, as printed by `--version`.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)");

#[derive(Debug, Parser)]
#[command(name = "space", version = VERSION, about = "Score weather discussions by synoptic phenomena and location")]
pub struct Cli {
    /// TOML file with default settings (flags and SPACE_* variables win).
    #[arg(long, global = true, env = "SPACE_CONFIG")]
    pub config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download discussions from the archive API and write raw samples.
    Ingest(IngestArgs),
    /// Filter raw samples into scoring-ready reference texts.
    Preprocess(PreprocessArgs),
    /// Score a single predicted/reference pair.
    Score(ScoreArgs),
    /// Score a corpus of predictions and write a report.
    Evaluate(EvaluateArgs),
    /// Generate baseline predictions.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Record, replay or synthesize test fixtures.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Debug, Args)]
pub struct ModelFiles {
    /// Location hierarchy definition (defaults to the bundled one).
    #[arg(long, env = "SPACE_HIERARCHY")]
    pub hierarchy: Option<PathBuf>,
    /// Station registry (defaults to the bundled 117 offices).
    #[arg(long, env = "SPACE_STATIONS")]
    pub stations: Option<PathBuf>,
    /// Phenomenon to score: pressure or temperature.
    #[arg(long, env = "SPACE_PHENOMENON")]
    pub phenomenon: Option<String>,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Comma-separated office ids, or `all`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub offices: Vec<String>,
    /// First UTC day (YYYY-MM-DD).
    #[arg(long)]
    pub start: chrono::NaiveDate,
    /// Last UTC day, inclusive.
    #[arg(long)]
    pub end: chrono::NaiveDate,
    /// Archive base URL.
    #[arg(long, env = "SPACE_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Maximum requests per second across all workers.
    #[arg(long, env = "SPACE_RATE")]
    pub rate: Option<f64>,
    /// Offices fetched concurrently.
    #[arg(long, env = "SPACE_JOBS")]
    pub jobs: Option<usize>,
    /// Station registry used to validate office ids.
    #[arg(long, env = "SPACE_STATIONS")]
    pub stations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub fetch: FetchArgs,
    /// Replay recorded responses from this directory instead of the network.
    #[arg(long, conflicts_with = "record")]
    pub fixtures: Option<PathBuf>,
    /// Also store every response body in this directory.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Output samples JSONL (`-` for stdout).
    #[arg(long, short, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Raw samples JSONL, or a directory of raw product `.txt` files.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Filtered samples JSONL (`-` for stdout).
    #[arg(long, short, default_value = "-")]
    pub out: PathBuf,
    /// Filter rules file (defaults to the bundled rules).
    #[arg(long, env = "SPACE_RULES")]
    pub rules: Option<PathBuf>,
    /// Station registry for the unknown-station check.
    #[arg(long, env = "SPACE_STATIONS")]
    pub stations: Option<PathBuf>,
    /// Where to write the drop-count summary JSON (default: stderr).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Human-readable summary.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// File with the predicted discussion.
    #[arg(long)]
    pub pred: PathBuf,
    /// File with the reference discussion.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Office id or hierarchy node the discussions are written for.
    #[arg(long)]
    pub station: String,
    #[command(flatten)]
    pub model: ModelFiles,
    /// Indented JSON.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Samples JSONL with reference texts.
    #[arg(long)]
    pub samples: PathBuf,
    /// Predictions JSONL: {sample_id, model?, predicted_text}.
    #[arg(long)]
    pub predictions: PathBuf,
    #[command(flatten)]
    pub model: ModelFiles,
    /// local, aggregate or both.
    #[arg(long, env = "SPACE_MODE")]
    pub mode: Option<String>,
    /// Seed recorded in the report and used for `--climatology-train`.
    #[arg(long, env = "SPACE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; output is identical for any value.
    #[arg(long, env = "SPACE_JOBS")]
    pub jobs: Option<usize>,
    /// Add a climatology row drawn from this training samples JSONL.
    #[arg(long)]
    pub climatology_train: Option<PathBuf>,
    /// Write per-sample score records (JSONL) here.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Aligned text table instead of JSON.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Subcommand)]
pub enum BaselineCommand {
    /// Same-station, same-month random training discussion per test sample.
    Climatology {
        /// Training samples JSONL.
        #[arg(long)]
        train: PathBuf,
        /// Test samples JSONL.
        #[arg(long)]
        test: PathBuf,
        #[arg(long, env = "SPACE_SEED")]
        seed: Option<u64>,
        /// Model label written on each prediction.
        #[arg(long, default_value = "climatology")]
        model: String,
        /// Predictions JSONL (`-` for stdout).
        #[arg(long, short, default_value = "-")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// Fetch from the live archive, storing response bodies in DIR.
    Record {
        #[command(flatten)]
        fetch: FetchArgs,
        /// Directory that receives one file per response body.
        #[arg(long)]
        dir: PathBuf,
        /// Also write the resulting samples JSONL here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build samples from recorded response bodies only.
    Replay {
        #[command(flatten)]
        fetch: FetchArgs,
        /// Directory of recorded response bodies.
        #[arg(long)]
        dir: PathBuf,
        /// Samples JSONL output (`-` for stdout).
        #[arg(long, short, default_value = "-")]
        out: PathBuf,
    },
    /// Write the synthetic corpus, raw products and API fixtures.
    Synth {
        /// Output directory (corpus/, raw_afd/ and api/ are created inside).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2025)]
        seed: u64,
        /// Forecast cycles in the corpus.
        #[arg(long, default_value_t = 10)]
        forecasts: usize,
        /// Station discussions per forecast cycle.
        #[arg(long, default_value_t = 20)]
        stations_per_forecast: usize,
        /// Number of raw products to write.
        #[arg(long, default_value_t = 60)]
        raw: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
