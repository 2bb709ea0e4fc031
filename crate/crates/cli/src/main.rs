mod args;
mod commands;
mod failure;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use clap::Parser;
use env_logger::Env;

use crate::args::Cli;
use crate::failure::Kind;

fn main() -> ExitCode {
    env_logger::Builder::from_env(Env::new().filter_or("FOOTPRINT_LOG", "warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // --help and --version go to stdout and are not errors.
            return ExitCode::from(if e.use_stderr() { Kind::Input.exit_code() } else { 0 });
        }
    };

    match catch_unwind(AssertUnwindSafe(|| commands::run(&cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(failure)) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.kind.exit_code())
        }
        Err(_) => ExitCode::from(Kind::Internal.exit_code()),
    }
}
