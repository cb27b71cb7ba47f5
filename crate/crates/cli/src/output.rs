use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Writes through a temporary file in the target directory, then renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::io(path, e);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(pmt_core::Error::from)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// `dir/name.ext` -> `dir/name.ext.<suffix>`
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, A: Serialize> {
    pub subcommand: &'a str,
    pub artifact_version: &'a str,
    pub seed: u64,
    pub threads: usize,
    pub args: &'a A,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl<A: Serialize> RunManifest<'_, A> {
    /// Written next to the first output as `<output>.manifest.json`.
    pub fn write(&self) -> Result<(), CliError> {
        let Some(first) = self.outputs.first() else {
            return Ok(());
        };
        write_json(&sidecar(Path::new(first), "manifest.json"), self)
    }
}
