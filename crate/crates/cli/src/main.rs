//! `gpasc` command-line interface.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical or
//! optimization failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpasc::GpError;

pub const CRITERIA: [&str; 4] = ["evidence", "loo", "basc", "bnasc"];
pub const KERNELS: [&str; 4] = ["se", "rq", "exp", "per"];

#[derive(Debug, Parser)]
#[command(name = "gpasc", version, about = "Gaussian-process model selection by evidence, LOO-CV and approximation set coding")]
pub struct Cli {
    /// Master seed; a random seed is chosen and echoed when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads used for library-level parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Progress diagnostics on stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw train and test sets from a teacher GP.
    Synth(SynthArgs),
    /// Optimize one kernel's hyperparameters under one criterion.
    Fit(FitArgs),
    /// Fit and rank student kernels over replicates (synthetic or real data).
    Rank(RankArgs),
    /// Test MSLL of a fitted model or of the trivial baseline.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TeacherArgs {
    /// Teacher kernel structure.
    #[arg(long, value_parser = KERNELS)]
    pub kernel: String,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub ell: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sf: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub sn: f64,
    /// Rational-quadratic shape (rq only).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Period (per only).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub period: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub teacher: TeacherArgs,
    #[arg(long, default_value_t = 64)]
    pub n_train: usize,
    #[arg(long, default_value_t = 256)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub x_max: f64,
    /// Output path; `<stem>.train.csv` and `<stem>.test.csv` are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AscArgs {
    /// Number of random partitions.
    #[arg(long = "J", alias = "j", default_value_t = 32)]
    pub j: usize,
    /// Agreement dimension (number of anchors).
    #[arg(long = "M", alias = "m", default_value_t = 2)]
    pub m: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ColumnArgs {
    /// Comma-separated input column names (default: every column except the output).
    #[arg(long, value_delimiter = ',')]
    pub inputs: Vec<String>,
    #[arg(long, default_value = "y")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, value_parser = KERNELS)]
    pub kernel: String,
    #[arg(long, value_parser = CRITERIA)]
    pub criterion: String,
    #[command(flatten)]
    pub asc: AscArgs,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[command(flatten)]
    pub columns: ColumnArgs,
    /// Standardize inputs before fitting; the transform is stored in the report.
    #[arg(long)]
    pub standardize: bool,
    /// Report path (JSON); printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Real-data CSV; synthetic teacher–student mode when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
    #[arg(long = "teacher", value_parser = KERNELS, default_value = "se")]
    pub teacher_kernel: String,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub ell: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sf: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub sn: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub period: f64,
    #[arg(long, value_delimiter = ',', value_parser = KERNELS, default_value = "se,rq,exp,per")]
    pub students: Vec<String>,
    #[arg(long, value_delimiter = ',', value_parser = CRITERIA, default_value = "evidence,loo,basc,bnasc")]
    pub criteria: Vec<String>,
    #[arg(long, value_parser = CRITERIA, default_value = "evidence")]
    pub fit_criterion: String,
    #[arg(long, default_value_t = 16)]
    pub replicates: usize,
    #[arg(long, default_value_t = 64)]
    pub n_train: usize,
    #[arg(long, default_value_t = 256)]
    pub n_test: usize,
    #[command(flatten)]
    pub asc: AscArgs,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    /// Report path (JSON).
    #[arg(long, default_value = "ranking.json")]
    pub out: PathBuf,
    /// Rank table path (CSV); defaults to `<out stem>.ranks.csv`.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Fit report produced by `fit`.
    #[arg(long, conflicts_with_all = ["kernel", "baseline"])]
    pub fit: Option<PathBuf>,
    #[arg(long, value_parser = KERNELS, requires = "theta")]
    pub kernel: Option<String>,
    /// Comma-separated log-space hyperparameters, noise last.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    /// Evaluate the trivial predictor fitted to the training outputs.
    #[arg(long, conflicts_with = "kernel")]
    pub baseline: bool,
    #[command(flatten)]
    pub columns: ColumnArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Failure with an exit code and a diagnostic for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<GpError> for Failure {
    fn from(e: GpError) -> Self {
        Self { code: if e.is_numerical() { 3 } else { 2 }, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(if code == 0 { 0 } else { 2 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
