// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bundle;
mod config;
mod experiments;
mod report;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::bundle::ResultBundle;
use crate::config::ExperimentConfig;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "FOCK_ERASURE_OUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<fock_erasure::Error> for CliError {
    fn from(e: fock_erasure::Error) -> Self {
        use fock_erasure::Error as E;
        match e {
            E::InvalidParameter { .. } => CliError::Config(e.to_string()),
            E::FullyErased(_) | E::Numerical(_) | E::StepTooLarge(_) | E::InsufficientData(_) => {
                CliError::Numerical(e.to_string())
            }
            E::DimensionMismatch { .. } | E::InvalidState(_) => CliError::Other(e.into()),
        }
    }
}

#[derive(Parser)]
#[command(name = "fock-erasure", version, about = "Simulate and analyze a Fock-state erasure qubit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and $FOCK_ERASURE_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the headline metrics of a result bundle.
    Report { bundle: PathBuf },
    /// Print an annotated example config listing every key.
    Schema,
    /// Run the built-in acceptance checks.
    Selftest,
}

fn run(config_path: &PathBuf, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Other(anyhow::anyhow!("reading {}: {e}", config_path.display())))?;
    let config = ExperimentConfig::from_toml(&text)?;
    let dir = out
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    log::info!("running {} with seed {}", config.experiment.name(), config.seed);
    let bundle = experiments::run(&config)?;
    for path in bundle.write(&dir)? {
        println!("wrote {}", path.display());
    }
    if !bundle.warnings.is_empty() {
        for w in &bundle.warnings {
            eprintln!("warning: {w}");
        }
        if bundle.warnings.iter().any(|w| w.contains("did not converge") || w.contains("stopped after")) {
            return Err(CliError::Numerical("a fit did not converge; results were still written".into()));
        }
    }
    Ok(())
}

fn selftest() -> Result<(), CliError> {
    let reports = fock_erasure::acceptance::run_all();
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} of {} checks passed", reports.len() - failed, reports.len());
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} acceptance checks failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Report { bundle } => ResultBundle::read(&bundle)
            .map(|b| print!("{}", report::render(&b)))
            .map_err(CliError::Other),
        Command::Schema => {
            print!("{}", config::SCHEMA);
            Ok(())
        }
        Command::Selftest => selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
