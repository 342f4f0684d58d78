//! Serialized forms of detection reports and evaluation metrics.

use std::fmt::Write as _;
use std::path::Path;

use birdcall_core::metrics::{ConfusionMatrix, MetricsReport};
use birdcall_core::pipeline::Report;
use serde::Serialize;

use crate::error::{Error, Result};

/// The one serializer shared by the CLI and the HTTP service, so both emit
/// identical bytes for the same report.
pub fn report_json_bytes(report: &Report) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// One row per detection; probability columns are named after the labels.
pub fn write_report_csv(path: &Path, report: &Report, labels: &[String]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = [
        "source",
        "window",
        "start_s",
        "end_s",
        "label",
        "confidence",
    ]
    .map(String::from)
    .into();
    header.extend(labels.iter().map(|l| format!("p({l})")));
    w.write_record(&header).map_err(csv_err)?;
    for d in &report.detections {
        let mut rec = vec![
            report.source.clone(),
            d.window.to_string(),
            d.start_s.to_string(),
            d.end_s.to_string(),
            d.label.clone(),
            d.confidence.to_string(),
        ];
        rec.extend(d.probs.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(Error::io(path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub label: String,
    pub support: u64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub model_id: String,
    pub n_samples: u64,
    pub accuracy: f64,
    pub loss: f64,
    pub classes: Vec<ClassRow>,
    /// Rows are true classes, columns predicted, in `classes` order.
    pub confusion_matrix: Vec<Vec<u64>>,
}

impl EvaluationReport {
    pub fn new(
        model_id: &str,
        labels: &[String],
        cm: &ConfusionMatrix,
        metrics: &MetricsReport,
        loss: f64,
    ) -> Self {
        let classes = labels
            .iter()
            .zip(&metrics.classes)
            .enumerate()
            .map(|(i, (label, m))| ClassRow {
                label: label.clone(),
                support: cm.counts[i].iter().sum(),
                sensitivity: m.sensitivity,
                specificity: m.specificity,
                precision: m.precision,
                f1: m.f1,
                degenerate: m.degenerate,
            })
            .collect();
        Self {
            model_id: model_id.into(),
            n_samples: cm.total(),
            accuracy: metrics.accuracy,
            loss,
            classes,
            confusion_matrix: cm.counts.clone(),
        }
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn table(&self) -> String {
        let width = self
            .classes
            .iter()
            .map(|c| c.label.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>11}  {:>11}  {:>9}  {:>6}",
            "class", "support", "sensitivity", "specificity", "precision", "f1"
        );
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7}  {:>11.2}  {:>11.2}  {:>9.2}  {:>6.2}{}",
                c.label,
                c.support,
                c.sensitivity,
                c.specificity,
                c.precision,
                c.f1,
                if c.degenerate { "  (degenerate)" } else { "" }
            );
        }
        let _ = writeln!(
            out,
            "accuracy {:.4} on {} samples, loss {:.4}",
            self.accuracy, self.n_samples, self.loss
        );
        out
    }
}
