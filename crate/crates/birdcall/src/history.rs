//! Training history as CSV plus a plot.

use std::path::{Path, PathBuf};

use birdcall_core::train::{EpochRecord, TrainingHistory};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::render_history;

#[derive(Serialize, Deserialize)]
struct HistoryRow {
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    train_acc: f64,
    val_acc: f64,
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes `csv_path` and a PNG next to it; returns the PNG path.
pub fn export_history(history: &TrainingHistory, csv_path: &Path) -> Result<PathBuf> {
    if history.is_empty() {
        return Err(birdcall_core::Error::EmptyInput("training history").into());
    }
    let mut w = csv::Writer::from_path(csv_path).map_err(csv_error(csv_path))?;
    for e in &history.epochs {
        w.serialize(HistoryRow {
            epoch: e.epoch,
            train_loss: e.train_loss,
            val_loss: e.val_loss,
            train_acc: e.train_acc,
            val_acc: e.val_acc,
        })
        .map_err(csv_error(csv_path))?;
    }
    w.flush().map_err(Error::io(csv_path))?;
    let png = csv_path.with_extension("png");
    render_history(history, &png)?;
    Ok(png)
}

pub fn read_history(csv_path: &Path) -> Result<TrainingHistory> {
    let mut r = csv::Reader::from_path(csv_path).map_err(csv_error(csv_path))?;
    let epochs = r
        .deserialize::<HistoryRow>()
        .map(|row| {
            row.map(|h| EpochRecord {
                epoch: h.epoch,
                train_loss: h.train_loss,
                train_acc: h.train_acc,
                val_loss: h.val_loss,
                val_acc: h.val_acc,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(csv_error(csv_path))?;
    Ok(TrainingHistory { epochs })
}
