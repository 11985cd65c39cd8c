//! `raremeta`: summarize studies, meta-analyze summaries, run conditional
//! analyses and simulate data.
//!
//! Exit status 0 on success, 1 on a usage error, 2 on a data error.

mod args;
mod commands;
mod genes;
mod io;
mod simulate;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use io::Failure;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run `raremeta --help` for usage.");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
