//! `kundt`: batch reports over the Kundt invariant engine.
//!
//! Every run prints one JSON document (`schema: 1`) or, with `--format text`,
//! a plain table. Exit code 0 when every check passes, 1 when a check fails,
//! 2 on malformed input.

mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use commands::{Cli, Outcome};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (text, outcome) = commands::run(&cli);
    // a closed pipe (e.g. `| head`) is not an error of the run
    let _ = writeln!(std::io::stdout(), "{text}");
    ExitCode::from(match outcome {
        Outcome::Pass => 0,
        Outcome::Fail => 1,
        Outcome::Malformed => 2,
    })
}
