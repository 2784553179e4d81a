use std::process::ExitCode;

use clap::Parser;
use sumset::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let result = Cli::parse().into_config().and_then(|config| run(&config));
    match result {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
