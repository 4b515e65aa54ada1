//! Command line front end: one subcommand per experiment, JSON reports and
//! CSV tables written to the output directory.

mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use config::ParseFailure;
use error::{CliError, EXIT_INPUT};

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os().collect()) as u8)
}

fn run(argv: Vec<std::ffi::OsString>) -> i32 {
    let cli = match config::parse(argv) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
        Err(ParseFailure::Cli(e)) => return report(e),
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return report(CliError::Input("--jobs must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return report(CliError::Experiment(e.to_string()));
        }
    }
    match commands::run(&cli) {
        Ok(()) => 0,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}
