//! Windowed inference over long recordings and detection summaries.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioClip};
use crate::mfcc::{FeatureConfig, Featurizer};
use crate::nn::{argmax, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub window_seconds: f64,
    pub min_tail_seconds: f64,
    /// Windows whose top probability falls below this are dropped.
    pub confidence_threshold: f64,
    pub features: FeatureConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_seconds: 15.0,
            min_tail_seconds: 3.0,
            confidence_threshold: 0.5,
            features: FeatureConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_seconds > 0.0) {
            return Err(Error::InvalidArgument("window length must be positive"));
        }
        if !(self.min_tail_seconds >= 0.0) {
            return Err(Error::InvalidArgument("minimum tail must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.confidence_threshold) {
            return Err(Error::InvalidArgument(
                "confidence threshold must be in [0, 1)",
            ));
        }
        self.features.validate()
    }
}

/// Classification of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(skip_serializing, default)]
    pub source: String,
    pub window: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
    pub confidence: f64,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub count: usize,
    pub mean_confidence: f64,
}

/// Settings a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub sample_rate_hz: u32,
    pub window_seconds: f64,
    pub min_tail_seconds: f64,
    pub confidence_threshold: f64,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub source: String,
    pub model_id: String,
    pub config: ConfigSnapshot,
    pub detections: Vec<Detection>,
    pub summary: Vec<SummaryRow>,
}

impl Report {
    pub fn new(
        source: &str,
        model_id: &str,
        config: &PipelineConfig,
        detections: Vec<Detection>,
    ) -> Self {
        Self {
            source: source.into(),
            model_id: model_id.into(),
            config: ConfigSnapshot {
                sample_rate_hz: config.features.sample_rate_hz,
                window_seconds: config.window_seconds,
                min_tail_seconds: config.min_tail_seconds,
                confidence_threshold: config.confidence_threshold,
                model_id: model_id.into(),
            },
            summary: summarize(&detections),
            detections,
        }
    }
}

/// Per-label count and mean confidence, ordered by label.
///
/// Confidences are summed in sorted order so the result does not depend on
/// the order of `detections`.
pub fn summarize(detections: &[Detection]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for d in detections {
        groups
            .entry(d.label.as_str())
            .or_default()
            .push(d.confidence);
    }
    groups
        .into_iter()
        .map(|(label, mut conf)| {
            conf.sort_by(f64::total_cmp);
            SummaryRow {
                label: label.into(),
                count: conf.len(),
                mean_confidence: conf.iter().sum::<f64>() / conf.len() as f64,
            }
        })
        .collect()
}

/// A trained network bound to its label names and feature front end.
#[derive(Debug, Clone)]
pub struct Classifier {
    network: Network,
    labels: Vec<String>,
    featurizer: Featurizer,
}

impl Classifier {
    pub fn new(network: Network, labels: Vec<String>, features: FeatureConfig) -> Result<Self> {
        if network.n_inputs() != features.n_mfcc {
            return Err(Error::LengthMismatch {
                expected: network.n_inputs(),
                found: features.n_mfcc,
            });
        }
        if labels.len() != network.n_classes() {
            return Err(Error::LengthMismatch {
                expected: network.n_classes(),
                found: labels.len(),
            });
        }
        Ok(Self {
            network,
            labels,
            featurizer: Featurizer::new(features)?,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }

    /// Segments the clip and classifies every window that clears the
    /// confidence threshold.
    pub fn classify_clip(
        &self,
        clip: &AudioClip,
        source: &str,
        config: &PipelineConfig,
    ) -> Result<Vec<Detection>> {
        config.validate()?;
        let clip = audio::resample(clip, self.featurizer.config().sample_rate_hz)?;
        let windows = audio::segment(&clip, config.window_seconds, config.min_tail_seconds)?;
        let mut detections = Vec::with_capacity(windows.len());
        for w in &windows {
            let features = self.featurizer.features(&w.clip)?;
            let probs = self.network.predict(features.as_slice())?;
            let best = argmax(&probs);
            let confidence = probs[best];
            if confidence < config.confidence_threshold {
                continue;
            }
            detections.push(Detection {
                source: source.into(),
                window: w.index,
                start_s: w.start_seconds(),
                end_s: w.end_seconds(),
                label: self.labels[best].clone(),
                confidence,
                probs,
            });
        }
        Ok(detections)
    }

    /// Decode, normalize, mix to mono, then [`Classifier::classify_clip`].
    pub fn classify_wav(
        &self,
        wav: &[u8],
        source: &str,
        config: &PipelineConfig,
    ) -> Result<Vec<Detection>> {
        let clip = audio::decode_clip(wav)?;
        self.classify_clip(&clip, source, config)
    }

    pub fn report_for_wav(
        &self,
        wav: &[u8],
        source: &str,
        model_id: &str,
        config: &PipelineConfig,
    ) -> Result<Report> {
        let detections = self.classify_wav(wav, source, config)?;
        Ok(Report::new(source, model_id, config, detections))
    }
}
