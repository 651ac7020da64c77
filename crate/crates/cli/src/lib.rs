//! Command-line harness for the avparse engine: parse, eval, sweep, synth,
//! ablate and verify.

pub mod args;
pub mod commands;
pub mod corpus;
pub mod error;
pub mod synth;
pub mod verify;

use std::io::Write;

pub use args::{Cli, Command, GlobalArgs};
pub use error::{CliError, CliResult};

/// Runs one parsed command line, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    commands::dispatch(cli, out)
}
