//! Per-clip MFCC feature tables (`id,label,c0..cN` CSV).

use std::path::Path;

use birdcall_core::audio::trim;
use birdcall_core::mfcc::{FeatureConfig, Featurizer};
use birdcall_core::train::{Dataset, DatasetManifest};
use rayon::prelude::*;

use crate::audio_file::read_clip;
use crate::error::{Error, Result};
use crate::manifest::resolve_entry;

/// Training clips are cut to this length before featurizing.
pub const TRIM_SECONDS: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub label: String,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, |r| r.coeffs.len())
    }

    /// Labels in order of first appearance.
    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = Vec::new();
        for r in &self.rows {
            if !labels.contains(&r.label) {
                labels.push(r.label.clone());
            }
        }
        labels
    }

    /// Converts to a numeric dataset, indexing labels against `labels`.
    pub fn to_dataset(&self, labels: &[String]) -> Result<Dataset> {
        let ids = self
            .rows
            .iter()
            .map(|r| {
                labels.iter().position(|l| *l == r.label).ok_or_else(|| {
                    Error::Config(format!(
                        "label {:?} of clip {:?} is unknown to the model",
                        r.label, r.id
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::new(
            self.rows.iter().map(|r| r.coeffs.clone()).collect(),
            ids,
        )?)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["id".to_owned(), "label".to_owned()];
        header.extend((0..self.width()).map(|i| format!("c{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![row.id.clone(), row.label.clone()];
            // `Display` for f64 is the shortest string that round-trips.
            rec.extend(row.coeffs.iter().map(f64::to_string));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(Error::io(path))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let csv_err = |message: String| Error::Csv {
            path: path.to_path_buf(),
            message,
        };
        let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => csv_err(format!("{other:?}")),
        })?;
        let headers = r.headers().map_err(|e| csv_err(e.to_string()))?.clone();
        if headers.get(0) != Some("id") || headers.get(1) != Some("label") {
            return Err(csv_err("header must start with `id,label`".into()));
        }
        let width = headers.len() - 2;
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(e.to_string()))?;
            let coeffs = rec
                .iter()
                .skip(2)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| csv_err(format!("row {}: {e}", i + 2)))?;
            if coeffs.len() != width {
                return Err(csv_err(format!(
                    "row {}: expected {width} coefficients",
                    i + 2
                )));
            }
            rows.push(FeatureRow {
                id: rec[0].to_owned(),
                label: rec[1].to_owned(),
                coeffs,
            });
        }
        Ok(Self { rows })
    }
}

/// Decodes, trims to 15 s and featurizes every manifest entry in parallel.
pub fn featurize_manifest(
    manifest: &DatasetManifest,
    manifest_path: &Path,
    config: &FeatureConfig,
) -> Result<FeatureTable> {
    let featurizer = Featurizer::new(config.clone())?;
    let rows = manifest
        .entries()
        .par_iter()
        .map(|entry| {
            let clip = read_clip(&resolve_entry(manifest_path, &entry.path))?;
            let clip = trim(&clip, TRIM_SECONDS)?;
            let features = featurizer.features(&clip)?;
            Ok(FeatureRow {
                id: entry.path.clone(),
                label: entry.label.clone(),
                coeffs: features.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable { rows })
}
