//! Versioned JSON model files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "layer_sizes": [80, 256, 256, 256, 5],
//!   "hidden_activation": "relu",
//!   "output_activation": "softmax",
//!   "dropout_rate": 0.5,
//!   "labels": ["..."],
//!   "features": { "n_mfcc": 80, ... },
//!   "layers": [ { "weights": [[...], ...], "bias": [...] }, ... ]
//! }
//! ```
//!
//! Weights are nested row-major arrays (`n_out` rows of `n_in`). Floats are
//! written in shortest round-trip form and parsed exactly.

use std::fs;
use std::path::Path;

use birdcall_core::mfcc::FeatureConfig;
use birdcall_core::nn::{DenseLayer, ModelConfig, Network};
use birdcall_core::pipeline::Classifier;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct LayerRecord {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelRecord {
    format_version: u32,
    layer_sizes: Vec<usize>,
    hidden_activation: String,
    output_activation: String,
    dropout_rate: f64,
    labels: Vec<String>,
    features: FeatureConfig,
    layers: Vec<LayerRecord>,
}

/// A network plus everything needed to run it on audio.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub network: Network,
    pub labels: Vec<String>,
    pub features: FeatureConfig,
}

impl SavedModel {
    pub fn into_classifier(self) -> Result<Classifier> {
        Ok(Classifier::new(self.network, self.labels, self.features)?)
    }
}

/// Model loaded from disk, with the id derived from its bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub model: SavedModel,
    pub model_id: String,
}

/// `mlp-` plus the first 12 hex digits of the file's SHA-256.
pub fn model_id(bytes: &[u8]) -> String {
    format!("mlp-{}", &hex::encode(Sha256::digest(bytes))[..12])
}

pub fn to_json_bytes(model: &SavedModel) -> Result<Vec<u8>> {
    let record = ModelRecord {
        format_version: FORMAT_VERSION,
        layer_sizes: model.network.config.layer_sizes.clone(),
        hidden_activation: "relu".into(),
        output_activation: "softmax".into(),
        dropout_rate: model.network.config.dropout_rate,
        labels: model.labels.clone(),
        features: model.features.clone(),
        layers: model
            .network
            .layers
            .iter()
            .map(|l| LayerRecord {
                weights: l.weights.chunks(l.n_in).map(<[f64]>::to_vec).collect(),
                bias: l.bias.clone(),
            })
            .collect(),
    };
    let mut bytes = serde_json::to_vec(&record)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn from_json_bytes(bytes: &[u8]) -> Result<SavedModel> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CorruptModel("missing format_version".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: u32::try_from(found).unwrap_or(u32::MAX),
        });
    }
    let record: ModelRecord =
        serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
    if record.hidden_activation != "relu" || record.output_activation != "softmax" {
        return Err(Error::CorruptModel(format!(
            "unsupported activations {}/{}",
            record.hidden_activation, record.output_activation
        )));
    }

    let sizes = &record.layer_sizes;
    if sizes.len() < 2 || record.layers.len() != sizes.len() - 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} layer records for layer sizes {sizes:?}",
            record.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(record.layers.len());
    for (i, (rec, w)) in record.layers.into_iter().zip(sizes.windows(2)).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        if rec.weights.len() != n_out || rec.bias.len() != n_out {
            return Err(Error::ShapeMismatch(format!(
                "layer {i}: expected {n_out} weight rows and biases, found {} and {}",
                rec.weights.len(),
                rec.bias.len()
            )));
        }
        if let Some((r, row)) = rec
            .weights
            .iter()
            .enumerate()
            .find(|(_, row)| row.len() != n_in)
        {
            return Err(Error::ShapeMismatch(format!(
                "layer {i}, row {r}: expected {n_in} weights, found {}",
                row.len()
            )));
        }
        layers.push(DenseLayer {
            n_in,
            n_out,
            weights: rec.weights.concat(),
            bias: rec.bias,
        });
    }
    let config = ModelConfig {
        layer_sizes: record.layer_sizes,
        dropout_rate: record.dropout_rate,
    };
    let network = Network::from_layers(config, layers)?;
    if record.labels.len() != network.n_classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} outputs",
            record.labels.len(),
            network.n_classes()
        )));
    }
    Ok(SavedModel {
        network,
        labels: record.labels,
        features: record.features,
    })
}

pub fn save_model(path: &Path, model: &SavedModel) -> Result<String> {
    let bytes = to_json_bytes(model)?;
    fs::write(path, &bytes).map_err(Error::io(path))?;
    Ok(model_id(&bytes))
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(LoadedModel {
        model: from_json_bytes(&bytes)?,
        model_id: model_id(&bytes),
    })
}
