mod commands;
mod config;
mod context;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::TimeMode;

/// Package, deploy, measure and report serverless function benchmarks.
#[derive(Debug, Parser)]
#[command(name = "slsbench", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file (TOML); flags override it.
    #[arg(long, global = true, env = "SLSBENCH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Directory for packages, run journals and reports.
    #[arg(long, global = true, env = "SLSBENCH_OUTPUT")]
    pub output: Option<PathBuf>,
    /// Seed for every stochastic component.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML document patching platform profiles field by field.
    #[arg(long, global = true)]
    pub profile_overlay: Option<PathBuf>,
    /// Directory searched for workloads by id (repeatable).
    #[arg(long = "workloads", global = true)]
    pub workloads: Vec<PathBuf>,
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect platform profiles.
    #[command(subcommand)]
    Platforms(PlatformsCmd),
    /// Check a workload deployment against a platform's limits.
    Validate(ValidateArgs),
    /// Build a workload's deployable archive.
    Package(PackageArgs),
    /// Deploy a workload and record its handle under the output directory.
    Deploy(DeployArgs),
    /// Invoke a deployed function.
    Invoke(InvokeArgs),
    /// Run an experiment plan file.
    Run(RunArgs),
    /// Run a builtin sweep.
    Sweep(SweepArgs),
    /// Summarize a run directory into CSV and figure documents.
    Report(ReportArgs),
    /// Tear down deployments and remove output.
    Clean(CleanArgs),
}

#[derive(Debug, Subcommand)]
pub enum PlatformsCmd {
    /// Platform names, one per line.
    List,
    /// One profile as JSON.
    Show { name: String },
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Memory in MB; defaults to 128.
    #[arg(long)]
    pub memory: Option<u32>,
    /// Defaults to the platform's first region.
    #[arg(long)]
    pub region: Option<String>,
    /// `name` or `name:version`; defaults to the manifest's language.
    #[arg(long)]
    pub language: Option<String>,
    /// Function timeout in seconds.
    #[arg(long, default_value_t = 60)]
    pub timeout: u32,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Workload directory or id.
    pub workload: String,
    #[arg(long)]
    pub platform: String,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Check declared sizes instead of building the package.
    #[arg(long, requires = "unzipped_bytes")]
    pub zip_bytes: Option<u64>,
    #[arg(long, requires = "zip_bytes")]
    pub unzipped_bytes: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PackageArgs {
    pub workload: String,
    /// Size variant `label:bytes` or `label:bytes:import` (repeatable).
    #[arg(long = "variant")]
    pub variants: Vec<String>,
}

#[derive(Debug, Args)]
pub struct DeployArgs {
    pub workload: String,
    #[arg(long, default_value = "local-sim")]
    pub provider: String,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Debug, Args)]
pub struct InvokeArgs {
    /// Function id printed by `deploy`.
    pub function: String,
    /// JSON payload file; `{}` when absent.
    #[arg(long)]
    pub payload: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub repeat: u32,
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    /// Overrides the plan's provider.
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long)]
    pub pacing_ms: Option<u64>,
    #[arg(long, value_enum)]
    pub time_mode: Option<TimeMode>,
    #[arg(long, value_enum)]
    pub execution: Option<ExecutionArg>,
    #[arg(long)]
    pub repetitions: Option<u32>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExecutionArg {
    Sequential,
    Parallel,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub plan: PathBuf,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Builtin sweep name; omit with --list.
    #[arg(required_unless_present = "list")]
    pub name: Option<String>,
    #[arg(long)]
    pub list: bool,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Figures,
    All,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub run_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::All)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Tear down every recorded deployment and remove the output directory.
    #[arg(long, conflicts_with = "run")]
    pub all: bool,
    /// Remove one run directory.
    #[arg(long)]
    pub run: Option<String>,
}

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    Violations,
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violations) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
