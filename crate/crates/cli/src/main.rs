//! `qmarch` command-line front end.
//!
//!   qmarch run --config cfg.json [--set key=value]... [--out DIR] [--seed N]
//!   qmarch verify --level quick|full
//!   qmarch encode (--spec periodic:8:0.2 | --matrix m.csv) --method camps|lin|hamsim

mod encode;
mod run;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Marker for failures caused by the user's configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser, Debug)]
#[command(
    name = "qmarch",
    version,
    about = "LCU time marching for the heat equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write trace, snapshots and manifest.
    Run(run::RunArgs),
    /// Execute the built-in invariant checks.
    Verify {
        #[arg(long, value_enum, default_value_t = Level::Quick)]
        level: Level,
    },
    /// Build a block encoding and report its quality.
    Encode(encode::EncodeArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<qmarch::Error>() {
        Some(qmarch::Error::Unstable { .. }) => 3,
        Some(qmarch::Error::NumericalAbort { .. }) => 4,
        Some(
            qmarch::Error::InvalidArgument(_)
            | qmarch::Error::DimensionMismatch { .. }
            | qmarch::Error::Unsupported(_)
            | qmarch::Error::RegisterTooLarge { .. }
            | qmarch::Error::NotUnitary { .. }
            | qmarch::Error::SpectralNorm { .. },
        ) => 2,
        _ => 1,
    }
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("QMARCH_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            ConfigError(format!(
                "QMARCH_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        if n == 0 {
            return Err(ConfigError("QMARCH_THREADS must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run(args) => run::cmd_run(&args),
        Command::Verify { level } => verify::cmd_verify(level),
        Command::Encode(args) => encode::cmd_encode(&args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
