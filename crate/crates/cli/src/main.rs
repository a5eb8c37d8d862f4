mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reo_core::error::Error;

/// Synthetic Earth-observation data, a small vision-language model with a
/// regression head, and its training and evaluation.
#[derive(Debug, Parser)]
#[command(name = "reo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate and validate a synthetic dataset.
    GenData(GenDataArgs),
    /// Run one training stage.
    Train(TrainArgs),
    /// Evaluate one task on the test split.
    Eval(EvalArgs),
    /// Train a stage-2 head per token strategy and compare them.
    AblateTokens(AblateArgs),
    /// Re-render json reports as csv, json or markdown.
    Report(ReportArgs),
    /// Check a dataset directory.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Training scenes.
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    pub scenes: u64,
    /// Test scenes.
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    pub test: u64,
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: u8,
    #[arg(long)]
    pub data: PathBuf,
    /// `key = value` stage configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Checkpoint to start from; required for stage 2.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// landcover, counting, vqa or agb.
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Expected regression strategy of the checkpoint (agb only).
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub report: PathBuf,
    /// Report format; defaults to the report file's extension.
    #[arg(long)]
    pub format: Option<String>,
    /// Evaluate only the first N test scenes.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Stage-1 checkpoint shared by every run.
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    /// Stage-2 configuration shared by every run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Where to keep the per-strategy checkpoints.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Json report files written by eval or ablate-tokens.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub data: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Precondition(_) | Error::Dimension(_) | Error::SequenceTooLong { .. } => 2,
        Error::Validation(_) | Error::Format { .. } | Error::Io { .. } | Error::Json { .. } => 3,
        Error::NonFinite(_) | Error::NonDeterministic(_) => 4,
        Error::Internal(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match commands::NumericMode::from_env() {
        Ok(commands::NumericMode::F32) => commands::run::<f32>(cli.command),
        Ok(commands::NumericMode::F64) => commands::run::<f64>(cli.command),
        Err(e) => Err(e),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
