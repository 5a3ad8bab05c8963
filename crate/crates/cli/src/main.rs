//! `keyscore` command-line driver.

mod commands;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use commands::{Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage {
            subcommand,
            message,
        }) => {
            let mut cmd = Cli::command();
            cmd.build();
            let usage = match cmd.find_subcommand_mut(subcommand) {
                Some(sub) => sub.render_usage(),
                None => cmd.render_usage(),
            };
            eprintln!("error: {message}\n\n{usage}");
            ExitCode::from(2)
        }
        Err(CliError::Stage { stage, source }) => {
            eprintln!("error: {stage} stage failed: {source:#}");
            ExitCode::from(1)
        }
    }
}
