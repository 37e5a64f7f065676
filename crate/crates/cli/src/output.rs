use std::io::Write;
use std::path::Path;

use serde::Serialize;

use qchain::hamiltonian::DEFAULT_MAX_DIM;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    /// A violated invariant; `what` names it and the offending object.
    pub fn failed(what: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: what.into(),
        }
    }
}

impl From<qchain::Error> for CliError {
    fn from(e: qchain::Error) -> Self {
        CliError {
            code: if e.is_input_error() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CliError::input(e.to_string()))?;
    Ok(())
}

/// `{tool, version, config, result}` as pretty JSON.
pub fn report<C: Serialize, R: Serialize>(config: &C, result: &R) -> CliResult<String> {
    let v = serde_json::json!({
        "tool": "qchain",
        "version": qchain::VERSION,
        "config": config,
        "result": result,
    });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Writes the report to `out`, or prints it when no path is given.
pub fn emit<C: Serialize, R: Serialize>(out: Option<&Path>, config: &C, result: &R) -> CliResult<()> {
    let text = report(config, result)?;
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Materialization cap, overridable through `CHAIN_MAX_DIM`.
pub fn max_dim() -> CliResult<usize> {
    match std::env::var("CHAIN_MAX_DIM") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("CHAIN_MAX_DIM must be an integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_MAX_DIM),
    }
}
