//! `gforecast`: ingest, synthesize, train under guidance, evaluate.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gforecast", version, about = "Seasonal flu forecasting under certified behavioral guidance")]
pub struct Cli {
    /// Seed for the data split and every training run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// JSON run configuration (inline or a path).
    #[arg(long, global = true)]
    pub config: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a region,year,week,wili CSV and print a season summary.
    Ingest(IngestArgs),
    /// Write synthetic seasons in the wILI CSV schema.
    Synth(SynthArgs),
    /// Train with fixed guidance for each week and run the safety test.
    Direct(RunArgs),
    /// Search the tolerance grid for each week.
    Auto(AutoArgs),
    /// Score a run's checkpoints on its test seasons.
    Evaluate(EvaluateArgs),
    /// Score externally produced forecasts against observed data.
    ScoreExternal(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated regions to keep.
    #[arg(long, value_delimiter = ',')]
    pub regions: Vec<String>,
    /// Write the accepted seasons back out in canonical order.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Season position (0 = week 40) of the holiday dip.
    #[arg(long)]
    pub dip_week: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub dip_depth: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub amplitude_jitter: f64,
    #[arg(long, default_value_t = 0.0)]
    pub center_jitter: f64,
    /// `name:noise` pairs; several regions share each year's epidemic shape.
    #[arg(long, value_delimiter = ',')]
    pub regions: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Guidance JSON (object or list), inline or a path.
    #[arg(long)]
    pub guidance: Option<String>,
    /// Overrides the confidence level of every guidance.
    #[arg(long)]
    pub delta: Option<f64>,
    /// `START:END` epidemiological weeks, wrapping after 52.
    #[arg(long, default_value = "40:17")]
    pub weeks: String,
    /// Comma-separated regions to keep from the data.
    #[arg(long, value_delimiter = ',')]
    pub regions: Vec<String>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory for per-week guided and baseline checkpoints.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AutoArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Ascending tolerances to try.
    #[arg(long, value_delimiter = ',')]
    pub epsilon_grid: Vec<f64>,
    /// Largest allowed guided/unconstrained RMSE ratio.
    #[arg(long)]
    pub performance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Report written by `direct` or `auto`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint directory; defaults to the one recorded in the run report.
    #[arg(long)]
    pub load_model: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// team,region,year,week,value CSV.
    #[arg(long)]
    pub forecasts: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub guidance: String,
    /// Epidemiological week being forecast.
    #[arg(long)]
    pub week: u32,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GF_LOG", "warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
