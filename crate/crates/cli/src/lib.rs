//! Command-line front end for the `gausscap` solvers.

pub mod config;
pub mod output;
pub mod run;

use std::fs::File;
use std::io::{self, BufWriter};

use clap::Parser;

pub use config::{Cli, ConfigError, Format, RunConfig};
pub use run::{execute, RunError};

/// Runs one invocation and returns its exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(ok) => i32::from(!ok),
        Err(e) => {
            eprintln!("gausscap: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<bool, RunError> {
    let config = RunConfig::from_cli(cli)?;
    let outcome = execute(&config)?;
    match &config.output {
        Some(path) => outcome.table.write(BufWriter::new(File::create(path)?), config.format)?,
        None => outcome.table.write(io::stdout().lock(), config.format)?,
    }
    Ok(outcome.ok)
}
