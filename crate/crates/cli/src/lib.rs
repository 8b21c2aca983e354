//! Command-line driver: loads a JSON run configuration, runs one experiment
//! and writes `report.json` plus CSV tables into the output directory.
//!
//! Exit codes: 0 success, 2 invalid configuration or model, 3 infeasible
//! functional (the report is still written), 4 numerical failure, 1 I/O.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qkl::ErrorCategory;
use serde_json::{json, Value};

pub use config::RunConfig;
use output::{num, OutputDir};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qkl::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("quadratic-exponential functional is infeasible (radius {radius})")]
    Infeasible { radius: f64 },
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "invalid_input",
            CliError::Core(e) => match e.category() {
                ErrorCategory::InvalidInput => "invalid_input",
                ErrorCategory::Infeasible => "infeasible",
                ErrorCategory::Numerical => "numerical",
            },
            CliError::Io(_) => "io",
            CliError::Infeasible { .. } => "infeasible",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "invalid_input" => 2,
            "infeasible" => 3,
            "numerical" => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qkl", version, about = "Quantum Karhunen-Loeve experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Physical realizability, Hurwitz test, CCR round trip.
    CheckModel(RunArgs),
    /// Orthonormality, Mercer and CCR tables of the sinusoidal basis.
    WienerKl(RunArgs),
    /// Sine-series error of e^{tA} against the number of terms.
    ExpmFourier(RunArgs),
    /// Nyström spectrum of the invariant covariance kernel.
    KernelEig(RunArgs),
    /// Quadratic-exponential functional with a convergence table over N.
    Qef(RunArgs),
    /// Closed form against the truncated Fock-space oracle.
    OracleCompare(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set T=2` or `--set model.theta.rows=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckModel(_) => "check-model",
            Command::WienerKl(_) => "wiener-kl",
            Command::ExpmFourier(_) => "expm-fourier",
            Command::KernelEig(_) => "kernel-eig",
            Command::Qef(_) => "qef",
            Command::OracleCompare(_) => "oracle-compare",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::CheckModel(a)
            | Command::WienerKl(a)
            | Command::ExpmFourier(a)
            | Command::KernelEig(a)
            | Command::Qef(a)
            | Command::OracleCompare(a) => a,
        }
    }
}

/// Outcome of a run whose report was written.
#[derive(Debug)]
pub struct RunSummary {
    pub report_path: PathBuf,
    pub report: Value,
}

pub fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut overrides = args
        .overrides
        .iter()
        .map(|s| config::parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), json!(seed)));
    }
    if let Some(out) = &args.out {
        overrides.push(("out_dir".into(), json!(out.to_string_lossy())));
    }
    RunConfig::load(args.config.as_deref(), &overrides)
}

/// Runs `command`. The report is written whenever the configuration loads
/// and the stage reaches its end; a stage failure (e.g. infeasibility) is
/// recorded in the report and then returned as the error.
pub fn run(command: &Command) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let cfg = load_config(command.args())?;
    let mut out = OutputDir::create(&cfg.out_dir)?;
    let stage = match command {
        Command::CheckModel(_) => commands::check_model(&cfg, &mut out),
        Command::WienerKl(_) => commands::wiener_kl(&cfg, &mut out),
        Command::ExpmFourier(_) => commands::expm_fourier(&cfg, &mut out),
        Command::KernelEig(_) => commands::kernel_eig(&cfg, &mut out),
        Command::Qef(_) => commands::qef(&cfg, &mut out),
        Command::OracleCompare(_) => commands::oracle_compare(&cfg, &mut out),
    }?;
    let status = match &stage.failure {
        None => json!({"ok": true}),
        Some(e) => json!({"ok": false, "category": e.category(), "message": e.to_string()}),
    };
    let report = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.echo(),
        "config_hash": cfg.content_hash(),
        "status": status,
        "results": stage.results,
        "artifacts": out.written(),
        "timing": {"elapsed_seconds": num(start.elapsed().as_secs_f64())},
    });
    out.write_json("report.json", &report)?;
    match stage.failure {
        Some(e) => Err(e),
        None => Ok(RunSummary {
            report_path: out.root().join("report.json"),
            report,
        }),
    }
}

/// Runs and maps the outcome to a process exit code, printing a one-line
/// JSON error record on stderr for failures.
pub fn execute(command: &Command) -> i32 {
    match run(command) {
        Ok(summary) => {
            println!("{}", summary.report_path.display());
            0
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": e.category(), "message": e.to_string(), "exit_code": e.exit_code()})
            );
            e.exit_code()
        }
    }
}
