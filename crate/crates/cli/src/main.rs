//! `compliant`: run episodes and benchmark sweeps, serve a mock policy, and
//! render reports.
//!
//! Exit codes: 0 success, 1 runtime or environment failure, 2 usage error.

mod report;
mod run;
mod serve;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use compliant_core::sim::catalog;

#[derive(Debug, Parser)]
#[command(name = "compliant", version, about = "Force-aware variable-impedance manipulation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run seeded trials and write metrics plus per-episode logs.
    Run(settings::RunArgs),
    /// Serve a scripted policy over WebSocket until interrupted.
    Serve(serve::ServeArgs),
    /// Compare metrics files and render episode traces.
    Report(report::ReportArgs),
    /// List built-in scenarios.
    List,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => settings::RunSettings::resolve(&args).and_then(|s| run::cmd_run(&s)),
        Command::Serve(args) => serve::cmd_serve(&args),
        Command::Report(args) => report::cmd_report(&args),
        Command::List => {
            for s in catalog() {
                println!("{:<16} {:?}  limit {} s", s.id, s.kind(), s.task.time_limit);
            }
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
