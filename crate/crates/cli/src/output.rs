//! Atomic file output: write to a temporary in the target directory, then
//! rename over the destination.

use std::io::Write;
use std::path::Path;

use crate::error::CliError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(CliError::io)?;
    tmp.write_all(bytes).map_err(CliError::io)?;
    tmp.flush().map_err(CliError::io)?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("persist {}: {e}", path.display())))?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Io(format!("create {}: {e}", path.display())))
}

pub fn write_json_atomic<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)?;
    write_atomic(path, json.as_bytes())
}
