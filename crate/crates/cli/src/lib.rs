//! File formats and the `protograde` command-line front end.
//!
//! Subcommands: `gen-synth`, `class-weights`, `train`, `eval`, `project`.
//! Exit codes are 0 on success, 1 for usage errors, 2 for invalid data or
//! configuration and 3 for numeric failure. A failing command prints one
//! diagnostic line to stderr and leaves no output files behind.

pub mod args;
pub mod checkpoint;
pub mod commands;
pub mod embl;
pub mod error;
pub mod json;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::error::ErrorKind as ClapErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::TrainArgs;
pub use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub written: Vec<PathBuf>,
}

/// Runs one command line against the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut io::stdout().lock(), &mut io::stderr().lock())
}

/// Runs one command line. `argv[0]` is the program name.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = match Cli::try_parse_from(argv) {
        Ok(cli) => execute(cli.command, stdout),
        Err(e) if matches!(e.kind(), ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion) => {
            let _ = write!(stdout, "{e}");
            Ok(Vec::new())
        }
        Err(e) => {
            // Keep clap's message, dropping the usage block and tips after it.
            let rendered = e.to_string();
            let message: Vec<&str> = rendered
                .lines()
                .take_while(|l| !l.trim().is_empty() && !l.starts_with("Usage:"))
                .map(str::trim)
                .collect();
            Err(CliError::Usage(message.join(" ").trim_start_matches("error: ").to_string()))
        }
    };
    match result {
        Ok(written) => CommandOutcome { exit_code: 0, written },
        Err(err) => {
            let line = err.to_string().replace(['\n', '\r'], " ");
            let _ = writeln!(stderr, "protograde: error: {line}");
            CommandOutcome {
                exit_code: err.exit_code(),
                written: Vec::new(),
            }
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<Vec<PathBuf>, CliError> {
    let staged = match &command {
        Command::GenSynth { out, config, seed } => commands::gen_synth(out, config.as_deref(), *seed)?,
        Command::ClassWeights {
            data,
            scheme,
            alpha,
            split,
            out,
            seed,
        } => {
            let (text, staged) = commands::class_weights(data, *scheme, *alpha, *split, out.as_deref(), *seed)?;
            let written = staged.commit()?;
            let _ = writeln!(stdout, "{text}");
            return Ok(written);
        }
        Command::Train {
            config,
            data,
            out,
            seed,
            scheme,
            alpha,
            warm_start,
            split,
        } => commands::train(TrainArgs {
            config: config.as_deref(),
            data,
            out,
            seed: *seed,
            scheme: *scheme,
            alpha: *alpha,
            warm_start: warm_start.as_deref(),
            split: *split,
        })?,
        Command::Eval {
            model,
            data,
            split,
            out,
            seed,
        } => commands::eval(model, data, *split, out, *seed)?,
        Command::Project {
            model,
            data,
            split,
            out,
            seed,
        } => commands::project(model, data, *split, out, *seed)?,
    };
    let written = staged.commit()?;
    commands::announce(stdout, &written);
    Ok(written)
}
