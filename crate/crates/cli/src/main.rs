use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    alo_cli::main_with(alo_cli::Cli::parse())
}
