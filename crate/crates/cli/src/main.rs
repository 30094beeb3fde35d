use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = bmc_cli::Cli::parse();
    match bmc_cli::run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
