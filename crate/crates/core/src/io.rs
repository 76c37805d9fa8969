//! CSV and JSON readers/writers for point clouds and polylines.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! cloud written and read back is bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::PointCloud;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
        _ => Error::Io(e),
    })
}

/// Reads rows of numbers from CSV. `header` skips the first line.
pub fn read_rows_csv<R: Read>(reader: R, header: bool) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {i}: cannot parse {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_cloud_csv<R: Read>(reader: R, header: bool) -> Result<PointCloud> {
    PointCloud::from_rows(&read_rows_csv(reader, header)?)
}

/// Reads a JSON array of arrays.
pub fn read_cloud_json<R: Read>(reader: R) -> Result<PointCloud> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_reader(reader).map_err(|e| Error::Parse(e.to_string()))?;
    PointCloud::from_rows(&rows)
}

/// Loads a cloud from disk, picking JSON for `.json` files and CSV otherwise.
pub fn load_cloud(path: &Path, header: bool) -> Result<PointCloud> {
    let f = BufReader::new(open(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_cloud_json(f),
        _ => read_cloud_csv(f, header),
    }
}

/// Writes one row per line, comma separated.
pub fn write_rows_csv<W: Write, R: AsRef<[f64]>>(mut w: W, rows: &[R]) -> Result<()> {
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (j, v) in row.as_ref().iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cloud_csv<W: Write>(w: W, cloud: &PointCloud) -> Result<()> {
    let rows: Vec<&[f64]> = cloud.points().collect();
    write_rows_csv(w, &rows)
}

pub fn write_cloud_json<W: Write>(mut w: W, cloud: &PointCloud) -> Result<()> {
    serde_json::to_writer(&mut w, &cloud.to_rows()).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Counts data lines of a CSV file without parsing numbers.
pub fn count_csv_rows<R: BufRead>(reader: R) -> Result<usize> {
    let mut n = 0;
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() && !line.starts_with('#') {
            n += 1;
        }
    }
    Ok(n)
}
