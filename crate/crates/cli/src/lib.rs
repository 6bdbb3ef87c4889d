//! Command-line front end for `srw-core`: measure and result file formats,
//! the `dist`, `curve` and `gen` commands, and the reproduction experiments.

pub mod args;
pub mod commands;
pub mod error;
pub mod exp;
pub mod io;

pub use args::Cli;
pub use error::{CliError, Outcome};

use args::Command;

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Dist(a) => commands::dist(a),
        Command::Curve(a) => commands::curve(a),
        Command::Gen(a) => commands::gen(a),
        Command::Exp(a) => {
            let table = exp::run(a)?;
            table.write(&a.out_dir, a.trials, a.seed)?;
            if table.non_converged > 0 {
                eprintln!(
                    "warning: {} of {} solves stopped before reaching the gap target",
                    table.non_converged, table.solves
                );
            }
            Ok(Outcome::Converged)
        }
    }
}
