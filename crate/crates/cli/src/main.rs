mod args;
mod commands;
mod output;

use std::io::ErrorKind;
use std::process::ExitCode;

use clap::Parser;
use texret_core::Error;

use args::{Cli, Command};

/// 2 for usage, configuration and missing-input errors, 1 for everything else.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => 2,
        Error::Config(_) | Error::Manifest(_) | Error::Metric(_) | Error::Incompatible(_) | Error::Comparison(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("texret: cannot start {} worker threads: {e}", cli.jobs);
            return ExitCode::from(1);
        }
    }

    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Index(a) => commands::index(a),
        Command::Train(a) => commands::train(a),
        Command::Query(a) => commands::query(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Decompose(a) => commands::decompose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("texret: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
