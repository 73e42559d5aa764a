//! Command-line front end for `gravphase-core`.
//!
//! `run` parses arguments, dispatches to one of the subcommands and maps
//! failures to exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | invalid input (arguments, units, scenario files, I/O) |
//! | 2 | a `kdp verify` check failed |
//! | 3 | mirror schedule timing conflict |

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::Parser;

pub mod args;
pub mod commands;
pub mod config;
pub mod kdp_cmd;
pub mod output;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_PHYSICS: i32 = 2;
pub const EXIT_TIMING: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn physics(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_PHYSICS,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<gravphase_core::Error> for CliError {
    fn from(e: gravphase_core::Error) -> Self {
        let code = match e {
            gravphase_core::Error::TimingConflict { .. } => EXIT_TIMING,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

// A closed stdout (`gravphase ... | head`) ends the run quietly.
fn closed_pipe() -> CliError {
    CliError {
        code: EXIT_OK,
        message: String::new(),
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return closed_pipe();
        }
        Self::validation(format!("I/O error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe => closed_pipe(),
            _ => Self::validation(format!("CSV error: {e}")),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        match e.io_error_kind() {
            Some(std::io::ErrorKind::BrokenPipe) => closed_pipe(),
            _ => Self::validation(format!("JSON error: {e}")),
        }
    }
}

/// Run the CLI with `argv` (including the program name) and return the
/// process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if !e.message.is_empty() {
                let _ = writeln!(err, "error: {e}");
            }
            e.code
        }
    }
}

fn dispatch(cli: &args::Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let base = config::base_constants(cli.constants.as_deref())?;
    let fmt = output::Format::from_cli(cli);
    match &cli.command {
        args::Command::Phase(a) => commands::cmd_phase(a, base, &fmt, out, err),
        args::Command::Design(a) => commands::cmd_design(a, base, &fmt, out, err),
        args::Command::Simulate(a) => commands::cmd_simulate(a, base, &fmt, out, err),
        args::Command::Kdp(args::KdpCommand::Verify(a)) => kdp_cmd::cmd_verify(a, base, &fmt, out),
        args::Command::Kdp(args::KdpCommand::Evolve(a)) => kdp_cmd::cmd_evolve(a, base, &fmt, out),
    }
}
