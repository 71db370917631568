//! `childadapt` command-line tool. Each subcommand prints a JSON summary
//! with its effective configuration to stdout; diagnostics go to stderr.

use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod common;

use args::{Cli, Command};
use common::UsageError;

const USAGE_ERROR: u8 = 1;
const DATA_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let level = if cli.global.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(jobs) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.into()).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }

    let g = &cli.global;
    let result = match &cli.command {
        Command::Score(a) => commands::score(g, a),
        Command::BuildInstruction(a) => commands::build_instruction(a),
        Command::Annotate(a) => commands::annotate(a),
        Command::BuildPairs(a) => commands::build_pairs(g, a),
        Command::Decode(a) => commands::decode(g, a),
        Command::Evaluate(a) => commands::evaluate(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
        Command::TrainLm(a) => commands::train_lm(a),
        Command::Split(a) => commands::split(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            ExitCode::from(USAGE_ERROR)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(DATA_ERROR)
        }
    }
}
