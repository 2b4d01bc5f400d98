//! Shared command plumbing: failure categories with fixed exit codes,
//! strict JSON config loading, and artifact writers.

use std::fmt;
use std::fs::{self, File};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// A command failure, bucketed by exit code.
///
/// The contract is: 1 for anything wrong with the invocation or the
/// configuration (caught before the experiment starts), 2 for failures
/// while executing a validated experiment (numeric breakdowns, output
/// IO), and 3 when the verification suite ran to completion but at least
/// one property failed.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Properties,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Properties => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "run failed: {msg}"),
            CliError::Properties => write!(f, "verification failed (details in report.json)"),
        }
    }
}

/// Wraps any displayable error as a configuration failure (exit 1).
pub fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Wraps any displayable error as a runtime failure (exit 2).
pub fn runtime_err(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Loads a JSON config file, or the type's defaults when no path was
/// given. Parsing is strict: unknown keys are rejected, and parse errors
/// carry the offending line and column.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

/// Creates the output directory (and parents) if it does not exist.
pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

/// Writes a value as pretty-printed JSON with a trailing newline.
///
/// Serialization order follows struct declaration order and floats use
/// the shortest round-trip form, so identical values produce identical
/// bytes — the foundation of the resolved-config echo guarantee.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Runtime(format!("cannot serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Opens `path` for writing, truncating any previous run's artifact.
pub fn create_file(path: &Path) -> Result<File, CliError> {
    File::create(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}
