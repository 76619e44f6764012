mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use report::Failure;

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(t))
            .build_global()
            .map_err(|e| Failure::invalid(e.to_string()))?;
    }
    match &cli.command {
        Command::Constants(a) => commands::constants::run(a),
        Command::Estimate(a) => commands::estimate::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Verify(a) => commands::verify::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
