//! Library side of the `sploc` binary: argument definitions, subcommands,
//! result bundles and exit-code mapping.

pub mod args;
pub mod bundle;
pub mod commands;
pub mod scenario;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;
use sploc::SplocError;

use args::{Cli, Command, DEFAULT_OUT};
use commands::Global;

/// Success.
pub const EXIT_OK: i32 = 0;
/// Bad arguments, missing or malformed input files, inconsistent dimensions.
pub const EXIT_USAGE: i32 = 1;
/// Failures while running: i/o, unreadable trajectories, degenerate data.
pub const EXIT_RUNTIME: i32 = 2;

pub fn exit_code(err: &SplocError) -> i32 {
    match err {
        SplocError::Invalid(_)
        | SplocError::Parse { .. }
        | SplocError::Manifest(_)
        | SplocError::DimensionMismatch { .. } => EXIT_USAGE,
        SplocError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
        SplocError::Io { .. } | SplocError::Trajectory { .. } | SplocError::Degenerate(_) => EXIT_RUNTIME,
    }
}

fn init_logging(quiet: bool) {
    let level = if quiet { "error" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parse `argv`, run the chosen subcommand and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    init_logging(cli.quiet);
    let global = Global {
        seed: cli.seed,
        jobs: cli.jobs,
        out: cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    };
    let outcome = match &cli.command {
        Command::GenData(a) => commands::gen_data(a, &global),
        Command::Train(a) => commands::train(a, &global),
        Command::Replicate(a) => commands::replicate(a, &global),
        Command::Msip(a) => commands::msip(a, &global),
        Command::Rmsf(a) => commands::rmsf(a, &global),
        Command::Spectrum(a) => commands::spectrum(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
