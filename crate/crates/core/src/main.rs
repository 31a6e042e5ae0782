use std::process::ExitCode;

use clap::Parser;
use exitgame::cli::{run, RunConfig};

fn main() -> ExitCode {
    let rc = RunConfig::parse();
    match run(&rc) {
        Ok(report) => {
            print!("{report}");
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", report.failed_checks().join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
