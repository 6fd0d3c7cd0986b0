use std::fs::File;
use std::io::{self, BufReader};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod config;
mod simulate;
mod stream;

/// Online multiple testing with e-values.
#[derive(Debug, Parser)]
#[command(name = "elond", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo scenario and write trajectory and summary CSVs.
    Simulate(simulate::SimulateArgs),
    /// Test statistics read line by line.
    Stream(stream::StreamArgs),
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => {
            let out = simulate::run(args)?;
            eprintln!("seed {}", out.seed);
            println!("{}", out.trajectory.display());
            println!("{}", out.summary.display());
        }
        Command::Stream(args) => {
            let mut state = stream::StreamState::from_args(&args)?;
            let header = !args.no_header;
            let bad = match &args.input {
                Some(path) => {
                    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                    stream::run(&mut state, BufReader::new(f), io::stdout().lock(), io::stderr(), header)?
                }
                None => stream::run(&mut state, io::stdin().lock(), io::stdout().lock(), io::stderr(), header)?,
            };
            if bad > 0 {
                eprintln!("{bad} line(s) skipped");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
