use std::process::ExitCode;

use clap::Parser;
use delf::cli::{execute, Cli};

fn main() -> ExitCode {
    execute(&Cli::parse())
}
