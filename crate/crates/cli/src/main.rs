use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lowrank_parabolic::runner::{run_text, RunStatus};

/// Batch runner for low-rank parabolic experiments.
///
/// Exit status: 0 all checks passed, 1 a check was violated, 2 the config
/// could not be parsed, 3 numerical or output failure.
#[derive(Parser)]
#[command(name = "lowrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path of the `key = value` config file.
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Do not echo the run log to stdout.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            quiet,
        } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config.display());
                    return ExitCode::from(RunStatus::ParseError.code() as u8);
                }
            };
            let (status, log) = run_text(&text, seed, out.as_deref());
            match status {
                RunStatus::ParseError | RunStatus::Failure => eprint!("{log}"),
                _ if !quiet => print!("{log}"),
                _ => {}
            }
            ExitCode::from(status.code() as u8)
        }
    }
}
