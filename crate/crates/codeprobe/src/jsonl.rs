//! Line-delimited JSON files: one object per line, UTF-8, append-friendly.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

/// Read every record from a line-delimited file. Blank lines are skipped;
/// a malformed line fails with its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let file = File::open(path).map_err(|source| JsonlError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|source| JsonlError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            source,
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Write all records, replacing the file.
pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<(), JsonlError> {
    let unwritable = |source| JsonlError::Unwritable {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(unwritable)?;
    let mut writer = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("domain types serialize infallibly");
        writer.write_all(line.as_bytes()).map_err(unwritable)?;
        writer.write_all(b"\n").map_err(unwritable)?;
    }
    writer.flush().map_err(unwritable)
}

/// Append one record, creating the file if needed.
pub fn append_jsonl<T: Serialize>(path: &Path, item: &T) -> Result<(), JsonlError> {
    let unwritable = |source| JsonlError::Unwritable {
        path: path.to_path_buf(),
        source,
    };
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(unwritable)?;
    let line = serde_json::to_string(item).expect("domain types serialize infallibly");
    file.write_all(line.as_bytes()).map_err(unwritable)?;
    file.write_all(b"\n").map_err(unwritable)
}
