//! `fdmap`: experiment driver for f-divergence posterior learning.
//!
//! Exit codes: 0 success, 1 validation error, 2 verification failure,
//! 3 training failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{Arch, ExperimentConfig, NameList};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] fdmap::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn field(field: &str, msg: impl Into<String>) -> Self {
        CliError::Core(fdmap::Error::config(field, msg))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 2,
            CliError::Core(fdmap::Error::Training(_)) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fdmap", version, about = "f-divergence posterior learning and MAP classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the numerical certification suite.
    Verify(VerifyArgs),
    /// Symbol error rate of MAP-Genie, maxL and trained decoders over an SNR grid.
    DecodeSweep(SweepArgs),
    /// Learn a continuous posterior on a toy task and compare with the closed form.
    Toy(ToyArgs),
    /// Classification accuracy on a Gaussian mixture vs. the Bayes classifier.
    MixtureBench(MixtureArgs),
    /// Tabulate generators, conjugates and optimal discriminators on a grid.
    DivergenceReport(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Flat TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed; every component derives its own substream from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long = "out")]
    pub out_dir: Option<PathBuf>,
    /// Run independent work items one after another.
    #[arg(long)]
    pub sequential: bool,
    /// Validate, print the resolved settings and config hash, and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub arch: Option<Arch>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub steps_per_epoch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Learning rate at the last step as a fraction of `lr` (geometric decay).
    #[arg(long)]
    pub lr_final_fraction: Option<f64>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Hidden layer widths, e.g. `100,100`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainArgs,
    /// pam4, awgn or pam4-nonuniform.
    #[arg(long)]
    pub channel: Option<String>,
    /// Trained decoders (divergence names or `ce`); MAP-Genie and maxL are always included.
    #[arg(long, alias = "divergence")]
    pub divergences: Option<String>,
    /// `start:step:stop` in dB or a comma-separated list.
    #[arg(long)]
    pub snr: Option<String>,
    /// Test symbols per SNR point.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainArgs,
    /// exp or gauss.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, alias = "divergences")]
    pub divergence: Option<String>,
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Support measure |T_x|; must agree with `--support-box` when both are given.
    #[arg(long)]
    pub tx_measure: Option<f64>,
    /// Support box for X as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
    pub support_box: Option<Vec<f64>>,
    /// Rescale each reported posterior to integrate to one over the support box.
    #[arg(long)]
    pub normalize: bool,
    /// Directory for trained network checkpoints.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MixtureArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, alias = "divergence")]
    pub divergences: Option<String>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Dump posterior estimates for this many leading test points.
    #[arg(long, default_value_t = 0)]
    pub posteriors: usize,
    /// Normalise dumped posterior vectors to sum to one.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Support measure |T_x| for the unsupervised columns.
    #[arg(long)]
    pub tx_measure: Option<f64>,
    /// Points per grid.
    #[arg(long, default_value_t = 41)]
    pub points: usize,
}

impl Common {
    fn overlay(&self) -> ExperimentConfig {
        ExperimentConfig { seed: self.seed, out_dir: self.out_dir.clone(), ..Default::default() }
    }
}

impl TrainArgs {
    fn overlay(&self) -> ExperimentConfig {
        ExperimentConfig {
            arch: self.arch,
            batch_size: self.batch_size,
            epochs: self.epochs,
            steps_per_epoch: self.steps_per_epoch,
            lr: self.lr,
            lr_final_fraction: self.lr_final_fraction,
            optimizer: self.optimizer.clone(),
            dropout: self.dropout,
            hidden: self.hidden.clone(),
            ..Default::default()
        }
    }
}

/// File values, then common flags, then command flags.
fn resolve(common: &Common, extra: ExperimentConfig) -> Result<ExperimentConfig, CliError> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Ok(base.overlay(common.overlay()).overlay(extra))
}

fn names(text: &Option<String>) -> Option<NameList> {
    text.clone().map(NameList::One)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify(a) => commands::verify(&a.common, &resolve(&a.common, ExperimentConfig::default())?),
        Command::DecodeSweep(a) => {
            let extra = ExperimentConfig {
                channel: a.channel.clone(),
                divergence: names(&a.divergences),
                snr: a.snr.clone(),
                n: a.n,
                ..Default::default()
            };
            let cfg = resolve(&a.common, a.train.overlay().overlay(extra))?;
            commands::decode_sweep(&a.common, &cfg)
        }
        Command::Toy(a) => {
            let extra = ExperimentConfig {
                task: a.task.clone(),
                divergence: names(&a.divergence),
                n_train: a.n_train,
                tx_measure: a.tx_measure,
                support_box: match a.support_box.as_deref() {
                    Some([lo, hi]) => Some([*lo, *hi]),
                    Some(_) => return Err(CliError::field("support_box", "expected `lo,hi`")),
                    None => None,
                },
                normalize: a.normalize.then_some(true),
                ..Default::default()
            };
            let cfg = resolve(&a.common, a.train.overlay().overlay(extra))?;
            commands::toy(&a.common, &cfg, a.checkpoint_dir.as_deref())
        }
        Command::MixtureBench(a) => {
            let extra = ExperimentConfig {
                divergence: names(&a.divergences),
                n_test: a.n_test,
                normalize: a.normalize.then_some(true),
                ..Default::default()
            };
            let cfg = resolve(&a.common, a.train.overlay().overlay(extra))?;
            commands::mixture(&a.common, &cfg, a.posteriors)
        }
        Command::DivergenceReport(a) => {
            let extra = ExperimentConfig { tx_measure: a.tx_measure, ..Default::default() };
            let cfg = resolve(&a.common, extra)?;
            commands::divergence_report(&a.common, &cfg, a.points)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
