//! Batch front-end for the echo toolkit: one subcommand per job, a strict
//! JSON config, CSV data files plus a JSON manifest per run.

pub mod config;
pub mod error;
mod jobs;
mod output;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::RunConfig;
pub use error::{CliError, EXIT_COMPUTE, EXIT_CONFIG, EXIT_IO, EXIT_OK};
pub use output::{data_rows, MANIFEST};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Job {
    EchoCurve,
    Sequence,
    ScanCritical,
    Spectrum,
    Predict,
}

impl Job {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::EchoCurve => "echo-curve",
            Self::Sequence => "sequence",
            Self::ScanCritical => "scan-critical",
            Self::Spectrum => "spectrum",
            Self::Predict => "predict",
        }
    }
}

impl fmt::Display for Job {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Parser)]
#[command(name = "bhecho", version, about = "Loschmidt-echo experiments on the 1-D Bose-Hubbard chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Echo curves for a list of perturbation scenarios
    EchoCurve(JobArgs),
    /// Echo of the imprint + Feshbach-flip sequence
    Sequence(JobArgs),
    /// Decay-rate scan across J for several chain lengths
    ScanCritical(JobArgs),
    /// Lowest levels or full spectrum, with spacing statistics
    Spectrum(JobArgs),
    /// Closed-form short-time laws and the Feshbach scattering length
    Predict(JobArgs),
}

impl Command {
    pub fn split(self) -> (Job, JobArgs) {
        match self {
            Self::EchoCurve(a) => (Job::EchoCurve, a),
            Self::Sequence(a) => (Job::Sequence, a),
            Self::ScanCritical(a) => (Job::ScanCritical, a),
            Self::Spectrum(a) => (Job::Spectrum, a),
            Self::Predict(a) => (Job::Predict, a),
        }
    }
}

#[derive(Clone, Debug, clap::Args)]
pub struct JobArgs {
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    /// worker threads; overrides the config value
    #[arg(long)]
    pub threads: Option<usize>,
    /// replace existing output files
    #[arg(long)]
    pub overwrite: bool,
    /// omit wall time and timestamps from headers and manifest
    #[arg(long)]
    pub no_timestamp: bool,
}

/// What a finished job wrote.
#[derive(Clone, Debug)]
pub struct JobReport {
    pub outputs: Vec<PathBuf>,
    /// 0, or [`EXIT_COMPUTE`] when some scan points failed
    pub exit_code: i32,
    pub warnings: Vec<String>,
}

/// Parse, validate, compute and write. Nothing is written unless the
/// config is valid and no output would be clobbered.
pub fn run_job(job: Job, args: &JobArgs) -> Result<JobReport, CliError> {
    let cfg = RunConfig::from_path(&args.config)?;
    run_config(job, &cfg, args)
}

pub fn run_config(job: Job, cfg: &RunConfig, args: &JobArgs) -> Result<JobReport, CliError> {
    cfg.validate(job)?;
    let threads = match args.threads.or(cfg.threads) {
        Some(0) => return Err(CliError::config("threads", "must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let planned = jobs::planned_outputs(job, cfg)?;
    output::check_targets(&args.out, &planned, args.overwrite)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config("threads", e.to_string()))?;
    let ctx = output::Context::new(job, cfg, args, threads);
    pool.install(|| jobs::run(job, cfg, &ctx))
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (job, args) = cli.command.split();
    match run_job(job, &args) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for p in &report.outputs {
                println!("{}", p.display());
            }
            report.exit_code
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
