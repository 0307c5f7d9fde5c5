//! The `signkit` command line: synthesis, training, evaluation, occlusion
//! studies and presence analysis.
//!
//! Exit codes: 0 success, 1 data or runtime error, 2 usage error.

mod args;
mod commands;
pub mod manifest;
pub mod records;

use args::{Cli, Command};
use clap::Parser;
use std::ffi::OsString;
use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "SIGNKIT_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or flag combinations (exit 2).
    Usage(String),
    /// Unreadable or inconsistent data, failed training (exit 1).
    Data(anyhow::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = match raw.trim().parse() {
        Ok(n) if n >= 1 => n,
        _ => return usage(format!("{THREADS_ENV}={raw:?} must be a positive integer")),
    };
    // A pool may already exist when running in-process more than once.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Occlude(a) => commands::occlude::run(a),
        Command::Analyze(a) => commands::analyze::run(a),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Data(_) => EXIT_DATA,
            }
        }
    }
}
