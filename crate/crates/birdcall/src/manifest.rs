//! `path,label` manifest CSV.

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use birdcall_core::train::{DatasetManifest, ManifestEntry};

use crate::error::{Error, Result};

fn manifest_error(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

/// Reads and validates a manifest. Row numbers in errors count the header
/// as row 1.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = File::open(path).map_err(Error::io(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| manifest_error(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| manifest_error(path, 1, format!("missing `{name}` column")))
    };
    let (path_col, label_col) = (col("path")?, col("label")?);

    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| manifest_error(path, row, e.to_string()))?;
        let file = record.get(path_col).unwrap_or_default();
        let label = record.get(label_col).unwrap_or_default();
        if file.is_empty() {
            return Err(manifest_error(path, row, "empty path"));
        }
        if label.is_empty() {
            return Err(manifest_error(path, row, "empty label"));
        }
        if !seen.insert(file.to_owned()) {
            return Err(manifest_error(
                path,
                row,
                format!("duplicate path {file:?}"),
            ));
        }
        entries.push(ManifestEntry {
            path: file.to_owned(),
            label: label.to_owned(),
        });
    }
    if entries.is_empty() {
        return Err(manifest_error(path, 1, "manifest has no entries"));
    }
    Ok(DatasetManifest::new(entries)?)
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(["path", "label"]).map_err(csv_err)?;
    for e in manifest.entries() {
        writer.write_record([&e.path, &e.label]).map_err(csv_err)?;
    }
    writer.flush().map_err(Error::io(path))
}

/// Resolves a manifest entry relative to the manifest's directory.
pub fn resolve_entry(manifest_path: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}
