mod commands;
mod config;
mod report;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, Overrides};

/// Cartan decompositions, dual connections and holonomy checks.
#[derive(Parser, Debug)]
#[command(name = "cartan-dual", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    flags: Overrides,
}

/// Any failure that maps to exit status 2: bad flags, unreadable or
/// malformed files, and domain or singularity errors from the library.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<cartan_dual::Error> for InputError {
    fn from(e: cartan_dual::Error) -> Self {
        InputError(e.to_string())
    }
}

fn configure_threads() -> Result<(), InputError> {
    let Ok(raw) = std::env::var("CARTAN_DUAL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| InputError(format!("CARTAN_DUAL_THREADS must be a non-negative integer, got '{raw}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| InputError(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, InputError> {
    configure_threads()?;
    let cfg = config::resolve(cli.command, cli.flags)?;
    let report = commands::run(&cfg)?;
    report::write_output(cfg.out.as_deref(), &report.render(&cfg))?;
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("cartan-dual: a defect exceeds its tolerance");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("cartan-dual: {e}");
            ExitCode::from(2)
        }
    }
}
