use std::process::ExitCode;

use clap::Parser;
use srw_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match srw_cli::run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("srw: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
