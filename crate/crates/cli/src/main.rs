use std::process::ExitCode;

use clap::Parser;
use psa_cli::{execute, exit_code, Cli};
use psa_core::config::Verbosity;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            let verbosity = if cli.global.quiet {
                Verbosity::Quiet
            } else {
                report.verbosity
            };
            if verbosity != Verbosity::Quiet {
                for w in &report.warnings {
                    eprintln!("warning: {w}");
                }
                println!("{}", report.summary);
            }
            if verbosity == Verbosity::Verbose {
                for f in &report.files {
                    println!("wrote {}", f.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
