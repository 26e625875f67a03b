//! Atomic file writing and shared output helpers.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use waypath_core::{Error, Result, ScalarField};

/// Write `bytes` to `dir/name` atomically (temp file + rename).
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(dir.join(name))
        .map_err(|e| Error::Config(format!("cannot persist {name}: {e}")))?;
    Ok(())
}

pub fn write_field(dir: &Path, name: &str, field: &ScalarField) -> Result<()> {
    let mut buf = Vec::new();
    field.write_csv(&mut buf)?;
    write_atomic(dir, name, &buf)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    buf.push(b'\n');
    write_atomic(dir, name, &buf)
}
