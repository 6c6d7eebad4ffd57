use std::process::ExitCode;

use clap::Parser;
use ncvd::{commands, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::configure_threads().and_then(|_| commands::execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
