//! The `ragkit` command-line pipeline: synthetic data, prototype fitting,
//! likelihood embedding, classification and evaluation, each step writing
//! machine-readable outputs and a hash-stamped manifest.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;

use std::ffi::OsString;

use clap::Parser;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

/// Caps the rayon pool from `RAGKIT_THREADS`.
fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("RAGKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("RAGKIT_THREADS must be a positive integer, got `{raw}`")))?;
    // A pool built earlier in this process keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match cli::Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = init_threads().and_then(|()| cli::dispatch(cli));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
