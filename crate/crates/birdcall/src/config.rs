//! JSON application config.
//!
//! Every section and field is optional; missing values fall back to the
//! built-in defaults and command-line flags override both.
//!
//! ```json
//! {
//!   "features": { "n_mfcc": 80, "n_mels": 128, "frame_ms": 40.0, "hop_ms": 20.0, "sample_rate_hz": 44100 },
//!   "model": { "hidden_sizes": [256, 256, 256], "dropout_rate": 0.5 },
//!   "training": { "epochs": 100, "batch_size": 32, "test_fraction": 0.1, "seed": 0 },
//!   "pipeline": { "window_seconds": 15.0, "min_tail_seconds": 3.0, "confidence_threshold": 0.5 },
//!   "paths": { "model": "model.json" }
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use birdcall_core::mfcc::FeatureConfig;
use birdcall_core::nn::ModelConfig;
use birdcall_core::pipeline::PipelineConfig;
use birdcall_core::train::TrainingConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub hidden_sizes: Vec<usize>,
    pub dropout_rate: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![256, 256, 256],
            dropout_rate: 0.5,
        }
    }
}

impl ModelSettings {
    pub fn model_config(&self, n_inputs: usize, n_classes: usize) -> ModelConfig {
        let mut layer_sizes = vec![n_inputs];
        layer_sizes.extend(&self.hidden_sizes);
        layer_sizes.push(n_classes);
        ModelConfig {
            layer_sizes,
            dropout_rate: self.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub window_seconds: f64,
    pub min_tail_seconds: f64,
    pub confidence_threshold: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        let d = PipelineConfig::default();
        Self {
            window_seconds: d.window_seconds,
            min_tail_seconds: d.min_tail_seconds,
            confidence_threshold: d.confidence_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub model: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub features: FeatureConfig,
    pub model: ModelSettings,
    pub training: TrainingConfig,
    pub pipeline: PipelineSettings,
    pub paths: Paths,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Defaults when `path` is `None`.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |e: birdcall_core::Error| Error::Config(e.to_string());
        self.features.validate().map_err(invalid)?;
        self.training.validate().map_err(invalid)?;
        self.model.model_config(1, 1).validate().map_err(invalid)?;
        self.pipeline_config(self.features.clone())
            .validate()
            .map_err(invalid)
    }

    /// Pipeline settings around the feature front end a model was trained with.
    pub fn pipeline_config(&self, features: FeatureConfig) -> PipelineConfig {
        PipelineConfig {
            window_seconds: self.pipeline.window_seconds,
            min_tail_seconds: self.pipeline.min_tail_seconds,
            confidence_threshold: self.pipeline.confidence_threshold,
            features,
        }
    }
}

/// A required path: the flag if given, else the config file entry.
pub fn resolve_path(
    flag: Option<PathBuf>,
    from_config: &Option<PathBuf>,
    name: &str,
) -> Result<PathBuf> {
    flag.or_else(|| from_config.clone()).ok_or_else(|| {
        Error::Config(format!(
            "no {name} given (pass --{name} or set paths.{name})"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(body: &str) -> Result<AppConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, body).unwrap();
        AppConfig::load(&p)
    }

    #[test]
    fn empty_object_is_defaults() {
        assert_eq!(load_str("{}").unwrap(), AppConfig::default());
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let c =
            load_str(r#"{"training": {"epochs": 5}, "pipeline": {"confidence_threshold": 0.7}}"#)
                .unwrap();
        assert_eq!(c.training.epochs, 5);
        assert_eq!(c.training.batch_size, 32);
        assert_eq!(c.pipeline.confidence_threshold, 0.7);
        assert_eq!(c.pipeline.window_seconds, 15.0);
    }

    #[test]
    fn out_of_range_values_are_config_errors() {
        for body in [
            r#"{"pipeline": {"confidence_threshold": 1.0}}"#,
            r#"{"training": {"epochs": 0}}"#,
            r#"{"features": {"n_mfcc": 200}}"#,
            r#"{"model": {"dropout_rate": 1.5}}"#,
            r#"{"trainig": {}}"#,
            "not json",
        ] {
            assert!(matches!(load_str(body), Err(Error::Config(_))), "{body}");
        }
    }

    #[test]
    fn default_settings_build_reference_network() {
        let m = ModelSettings::default().model_config(80, 5);
        assert_eq!(m, ModelConfig::default());
        assert_eq!(m.param_count(), 153_605);
    }

    #[test]
    fn flag_beats_config_path() {
        let cfg = Some(PathBuf::from("from_file.json"));
        assert_eq!(
            resolve_path(Some("flag.json".into()), &cfg, "model").unwrap(),
            PathBuf::from("flag.json")
        );
        assert_eq!(
            resolve_path(None, &cfg, "model").unwrap(),
            PathBuf::from("from_file.json")
        );
        assert!(matches!(
            resolve_path(None, &None, "model"),
            Err(Error::Config(_))
        ));
    }
}
