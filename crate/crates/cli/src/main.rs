//! `prcrf`: inspect datasets, train and apply PRC random forests, run the
//! autoencoder filter on its own, and benchmark both pipelines.

mod args;
mod commands;
mod config_file;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::Cli;

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let merged = match config_file::merge_config(&raw, &Cli::command()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    // Later occurrences win, so flags given on the command line override the
    // values spliced in from the config file.
    let matches = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|sub| sub.args_override_self(true))
        .get_matches_from(merged);
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain, skipping causes already quoted by an outer message.
fn describe(error: &anyhow::Error) -> String {
    let mut message = error.to_string();
    for cause in error.chain().skip(1) {
        let text = cause.to_string();
        if !message.contains(&text) {
            message.push_str(": ");
            message.push_str(&text);
        }
    }
    message
}
