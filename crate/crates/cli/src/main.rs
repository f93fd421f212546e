use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kitaev_edge::error::Error;

mod commands;
mod config;
mod output;

use config::RunConfig;
use output::{Header, Writer};

/// Exit codes: 2 configuration, 3 physics threshold, 4 numerical or I/O.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        Self { code: 2, message }
    }

    pub fn physics(message: String) -> Self {
        Self { code: 3, message }
    }

    pub fn numerical(message: String) -> Self {
        Self { code: 4, message }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Invalid(_) | Error::Domain(_) => Self::config(message),
            Error::Physics(_) => Self::physics(message),
            _ => Self::numerical(message),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "kitaev-edge",
    version,
    about = "Chiral Majorana edge modes of the Kitaev honeycomb model"
)]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Disorder seed (overrides disorder.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Strip band structure and edge branch.
    Spectrum,
    /// Single-qubit transfer between two spins on a finite sample.
    Transfer,
    /// Full SWAP of two spins through the edge.
    Swap,
    /// Transfer fidelity under random coupling disorder.
    Disorder,
    /// Tables of the closed-form edge dispersions.
    Theory,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Transfer => "transfer",
            Command::Swap => "swap",
            Command::Disorder => "disorder",
            Command::Theory => "theory",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("threads: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(cfg.disorder.seed);
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| cfg.output.directory.clone());
    let mut out = Writer::new(&dir, Header::new(cli.command.name(), &cfg, seed))?;
    let status = match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &mut out)?,
        Command::Transfer => commands::transfer(&cfg, &mut out)?,
        Command::Swap => commands::swap(&cfg, &mut out)?,
        Command::Disorder => commands::disorder(&cfg, &mut out, seed)?,
        Command::Theory => commands::theory_tables(&cfg, &mut out)?,
    };
    for w in &status.warnings {
        eprintln!("warning: {w}");
    }
    for p in &out.written {
        println!("{}", p.display());
    }
    match status.threshold_failed {
        Some(m) => Err(CliError::physics(m)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
