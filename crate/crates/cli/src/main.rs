//! `rkhskit`: batch front end for fitting, tuning, embedding and testing.

mod args;
mod commands;
mod output;

use clap::Parser;
use std::process::ExitCode;

use args::Cli;

const DATA_ERROR: u8 = 2;
const SOLVER_FAILURE: u8 = 3;

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("RKHSKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("RKHSKIT_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot configure thread pool: {e}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(DATA_ERROR);
    }
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                ExitCode::from(SOLVER_FAILURE)
            } else {
                ExitCode::from(DATA_ERROR)
            }
        }
    }
}
