use std::io::Write;
use std::path::Path;

use crate::error::{ManuError, Result};

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| ManuError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| ManuError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| ManuError::io(path, e))?;
    tmp.persist(path).map_err(|e| ManuError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| ManuError::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| ManuError::io(path, e))
}
