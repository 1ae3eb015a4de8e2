use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use mla_core::bench::{run_cli, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run_cli(&cli, &mut out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            let _ = out.flush();
            eprintln!("mla-bench: residual check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("mla-bench: {e}");
            ExitCode::from(2)
        }
    }
}
