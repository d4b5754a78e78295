use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use parasemi::harness::{self, Config, Subcommand};
use parasemi::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    VerifySemigroup,
    HolderNorm,
    SolveDeterministic,
    SimulateConvolution,
    SolveStochastic,
    Heat,
    Report,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::VerifySemigroup => Subcommand::VerifySemigroup,
            Command::HolderNorm => Subcommand::HolderNorm,
            Command::SolveDeterministic => Subcommand::SolveDeterministic,
            Command::SimulateConvolution => Subcommand::SimulateConvolution,
            Command::SolveStochastic => Subcommand::SolveStochastic,
            Command::Heat => Subcommand::Heat,
            Command::Report => Subcommand::Report,
        }
    }
}

/// Spectral experiments for linear parabolic evolution equations.
///
/// Set PARASEMI_THREADS to cap the number of worker threads; results do not
/// depend on it.
#[derive(Debug, Parser)]
#[command(name = "parasemi", version)]
struct Cli {
    command: Command,
    /// Flat `key = value` file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output (for `report`: the run) directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("PARASEMI_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| Error::Config {
        key: "PARASEMI_THREADS".into(),
        message: format!("expected a positive integer, got `{v}`"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config {
            key: "PARASEMI_THREADS".into(),
            message: e.to_string(),
        })
}

fn execute(cli: &Cli) -> Result<harness::RunOutcome, Error> {
    init_threads()?;
    let sub = Subcommand::from(cli.command);
    let config = match (&cli.config, sub) {
        (Some(p), _) => Config::from_file(p)?,
        (None, Subcommand::Report) => Config::default(),
        (None, _) => {
            return Err(Error::Config {
                key: "--config".into(),
                message: "a config file is required".into(),
            })
        }
    };
    harness::run(sub, &config, &cli.out, cli.seed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            let failed: Vec<&str> = outcome.gates.iter().filter(|g| !g.pass).map(|g| g.name.as_str()).collect();
            if !failed.is_empty() {
                let e = Error::Tolerance(format!("gates failed: {}", failed.join(", ")));
                eprintln!("{e}");
                harness::write_error(&cli.out, &e);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            harness::write_error(&cli.out, &e);
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
