//! `etstab`: design reports, simulation runs and delay sweeps.

mod commands;
mod sweep;

use std::process::ExitCode;

use clap::Parser;

use commands::{Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("etstab: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Violation(_) => 4,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &etstab::Error) -> u8 {
    use etstab::Error;
    match e {
        Error::Infeasible { .. } => 3,
        Error::SweepPoint { source, .. } => core_exit_code(source),
        Error::DecoderAmbiguity { .. } | Error::ChannelBusy { .. } | Error::Zeno { .. } => 4,
        _ => 2,
    }
}
