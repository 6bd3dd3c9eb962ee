use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use proxstair::Error;
use serde::Serialize;

/// Version of every JSON report written by the CLI.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_IO: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_IO, message: format!("{}: {err}", path.display()) }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    pub fn no_convergence(message: impl Into<String>) -> Self {
        CliError { code: EXIT_NO_CONVERGENCE, message: message.into() }
    }

    /// Classifies a library error raised while processing `path`.
    pub fn from_lib(path: &Path, err: Error) -> Self {
        let message = format!("{}: {err}", path.display());
        let code = match err {
            Error::Io(_) => EXIT_IO,
            Error::NoConvergence { .. }
            | Error::DenoiseNoConvergence(_)
            | Error::AdmmNoConvergence(_)
            | Error::LineSearchStall(_)
            | Error::LinearSolveFail { .. } => EXIT_NO_CONVERGENCE,
            _ => EXIT_INPUT,
        };
        CliError { code, message }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = create_file(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::io(path, e))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}
