use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match crowdlabel_server::cli::run(crowdlabel_server::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
