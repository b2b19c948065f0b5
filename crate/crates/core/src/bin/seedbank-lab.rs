use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seedbank_lab::cli::{describe, run, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "seedbank-lab", version, about = "Dual walks and dormancy experiments on tori")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a JSON config and write a CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; changes wall time only.
        #[arg(long, env = "SEEDBANK_LAB_THREADS")]
        threads: Option<usize>,
        /// Overrides the output path in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe an experiment.
    Describe { name: String },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    match Args::parse().command {
        Command::Describe { name } => match describe(&name) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run { config, seed, threads, out } => {
            if let Some(n) = threads.filter(|n| *n > 0) {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    return fail(CliError::Io(e.to_string()));
                }
            }
            match run(&config, &RunOptions { seed, out }) {
                Ok(o) => {
                    println!("{} PASS: {} rows written to {}", o.experiment, o.records.len(), o.output.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
