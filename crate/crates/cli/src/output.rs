//! Output helpers: every file is written to a temporary sibling and renamed
//! into place, so readers never observe a partial file.

use std::io::Write;
use std::path::Path;

use geoquant::{io, Error};
use serde_json::Value;

/// Writes `bytes` to `path` atomically, or to stdout when `path` is `None`.
pub fn write_atomic(path: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        out.flush()?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_rows<R: AsRef<[f64]>>(path: Option<&Path>, rows: &[R]) -> Result<(), Error> {
    let mut buf = Vec::new();
    io::write_rows_csv(&mut buf, rows)?;
    write_atomic(path, &buf)
}

pub fn write_json(path: Option<&Path>, value: &Value) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
