use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    wlab_cli::run(wlab_cli::Cli::parse())
}
