//! `kgconcept`: file-to-file pipeline stages for conceptualization-based
//! knowledge graph expansion.
//!
//! Exit status: 0 success, 1 other failure, 2 usage, 3 missing or
//! unreadable file, 4 malformed input, 5 scorer failure.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use kgconcept_core::generate::ScorerError;
use kgconcept_core::metrics::MetricsError;
use kgconcept_core::parse::ParseError;
use kgconcept_core::sampler::ConfigError;
use kgconcept_core::store::LoadError;

use args::Cli;
use commands::UsageError;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<LoadError>() {
            return match e {
                LoadError::Io { .. } | LoadError::Read(_) => 3,
                _ => 4,
            };
        }
        if let Some(e) = cause.downcast_ref::<ParseError>() {
            return match e {
                ParseError::Io { .. } | ParseError::Read(_) => 3,
                _ => 4,
            };
        }
        if let Some(e) = cause.downcast_ref::<MetricsError>() {
            return match e {
                MetricsError::Io { .. } | MetricsError::Read(_) => 3,
                _ => 4,
            };
        }
        if cause.is::<ScorerError>() {
            return 5;
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(1);
        }
    }

    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
