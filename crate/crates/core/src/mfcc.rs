//! Mel scale, triangular mel filterbank, DCT-II and MFCC extraction.

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::dsp::{FrameLayout, SpectralAnalyzer};
use crate::{Error, Result};

/// Standard mel-scale constant.
pub const MEL_CONSTANT: f64 = 2595.0;
const MEL_BREAK_HZ: f64 = 700.0;
const LOG_FLOOR: f64 = 1e-10;

/// `constant * log10(1 + f / 700)`, with a configurable constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelScale {
    pub constant: f64,
}

impl Default for MelScale {
    fn default() -> Self {
        Self {
            constant: MEL_CONSTANT,
        }
    }
}

impl MelScale {
    pub fn hz_to_mel(&self, hz: f64) -> Result<f64> {
        if !(hz >= 0.0) {
            return Err(Error::InvalidArgument("frequency must be non-negative"));
        }
        Ok(self.constant * libm::log1p(hz / MEL_BREAK_HZ) / core::f64::consts::LN_10)
    }

    pub fn mel_to_hz(&self, mel: f64) -> Result<f64> {
        if !(mel >= 0.0) {
            return Err(Error::InvalidArgument("mel value must be non-negative"));
        }
        Ok(MEL_BREAK_HZ * libm::expm1(mel / self.constant * core::f64::consts::LN_10))
    }
}

pub fn hz_to_mel(hz: f64) -> Result<f64> {
    MelScale::default().hz_to_mel(hz)
}

pub fn mel_to_hz(mel: f64) -> Result<f64> {
    MelScale::default().mel_to_hz(mel)
}

/// MFCC front-end settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub n_mfcc: usize,
    pub n_mels: usize,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub f_min_hz: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub f_max_hz: Option<f64>,
    pub mel_constant: f64,
    /// Rate every clip is brought to before framing.
    pub sample_rate_hz: u32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_mfcc: 80,
            n_mels: 128,
            frame_ms: crate::dsp::DEFAULT_FRAME_MS,
            hop_ms: crate::dsp::DEFAULT_HOP_MS,
            f_min_hz: 0.0,
            f_max_hz: None,
            mel_constant: MEL_CONSTANT,
            sample_rate_hz: 44_100,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return Err(Error::InvalidArgument("n_mfcc must be in 1..=n_mels"));
        }
        if self.n_mels < 2 {
            return Err(Error::InvalidArgument("need at least two mel filters"));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive"));
        }
        if !(self.f_min_hz >= 0.0 && self.f_min_hz < self.f_max(self.sample_rate_hz)) {
            return Err(Error::InvalidArgument("require 0 <= f_min < f_max"));
        }
        if !(self.mel_constant > 0.0) {
            return Err(Error::InvalidArgument("mel constant must be positive"));
        }
        Ok(())
    }

    pub fn f_max(&self, sample_rate_hz: u32) -> f64 {
        self.f_max_hz.unwrap_or(f64::from(sample_rate_hz) / 2.0)
    }
}

/// Triangular filters equally spaced on the mel axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels` rows over `fft_size / 2 + 1` bins.
    pub weights: Vec<Vec<f64>>,
    pub center_freqs_hz: Vec<f64>,
    /// Non-zero bin range per row, `start..end`.
    support: Vec<(usize, usize)>,
}

impl MelFilterbank {
    /// Filters are evaluated at each bin's centre frequency, so narrow
    /// low-frequency triangles still land on at least one bin.
    pub fn new(config: &FeatureConfig, fft_size: usize, sample_rate_hz: u32) -> Result<Self> {
        if config.n_mels < 2 {
            return Err(Error::InvalidArgument("need at least two mel filters"));
        }
        if fft_size == 0 || !fft_size.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(fft_size));
        }
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        let f_max = config.f_max(sample_rate_hz);
        if f_max > nyquist {
            return Err(Error::InvalidArgument("f_max exceeds Nyquist"));
        }
        if !(config.f_min_hz >= 0.0 && config.f_min_hz < f_max) {
            return Err(Error::InvalidArgument("require 0 <= f_min < f_max"));
        }
        let scale = MelScale {
            constant: config.mel_constant,
        };
        let mel_lo = scale.hz_to_mel(config.f_min_hz)?;
        let mel_hi = scale.hz_to_mel(f_max)?;
        let n_points = config.n_mels + 2;
        let edges = (0..n_points)
            .map(|i| scale.mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64))
            .collect::<Result<Vec<f64>>>()?;

        let n_bins = fft_size / 2 + 1;
        let bin_hz = f64::from(sample_rate_hz) / fft_size as f64;
        let mut weights = Vec::with_capacity(config.n_mels);
        let mut support = Vec::with_capacity(config.n_mels);
        for m in 0..config.n_mels {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let row: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let rise = (f - left) / (center - left);
                    let fall = (right - f) / (right - center);
                    rise.min(fall).max(0.0)
                })
                .collect();
            let start = row.iter().position(|&w| w > 0.0).unwrap_or(0);
            let end = row.iter().rposition(|&w| w > 0.0).map_or(start, |i| i + 1);
            weights.push(row);
            support.push((start, end));
        }
        Ok(Self {
            weights,
            center_freqs_hz: edges[1..=config.n_mels].to_vec(),
            support,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    /// Filter energies for one power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.support)
            .map(|(row, &(start, end))| {
                row[start..end]
                    .iter()
                    .zip(&power[start..end])
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect()
    }
}

/// Precomputed orthonormal DCT-II basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Dct {
    n_in: usize,
    basis: Vec<f64>,
}

impl Dct {
    pub fn new(n_in: usize, n_out: usize) -> Result<Self> {
        if n_in == 0 {
            return Err(Error::EmptyInput("DCT input"));
        }
        if n_out > n_in {
            return Err(Error::InvalidArgument("DCT output longer than input"));
        }
        let n = n_in as f64;
        let mut basis = Vec::with_capacity(n_in * n_out);
        for k in 0..n_out {
            let scale = if k == 0 {
                libm::sqrt(1.0 / n)
            } else {
                libm::sqrt(2.0 / n)
            };
            basis.extend(
                (0..n_in)
                    .map(|j| scale * libm::cos(PI * k as f64 * (2 * j + 1) as f64 / (2.0 * n))),
            );
        }
        Ok(Self { n_in, basis })
    }

    pub fn transform(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_in);
        self.basis
            .chunks_exact(self.n_in)
            .map(|row| row.iter().zip(v).map(|(b, x)| b * x).sum())
            .collect()
    }
}

/// Orthonormal DCT-II, first `n_out` coefficients.
pub fn dct_ii(v: &[f64], n_out: usize) -> Result<Vec<f64>> {
    Ok(Dct::new(v.len(), n_out)?.transform(v))
}

/// Per-clip MFCC summary fed to the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Column means of a frame matrix.
pub fn aggregate_features(frames: &[Vec<f64>]) -> Result<FeatureVector> {
    let first = frames.first().ok_or(Error::EmptyInput("no MFCC frames"))?;
    let width = first.len();
    let mut sums = alloc::vec![0.0; width];
    for row in frames {
        if row.len() != width {
            return Err(Error::LengthMismatch {
                expected: width,
                found: row.len(),
            });
        }
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = frames.len() as f64;
    Ok(FeatureVector(sums.into_iter().map(|s| s / n).collect()))
}

/// MFCC extractor bound to one sample rate; the filterbank and DCT basis are
/// built once and shared read-only.
#[derive(Debug, Clone)]
pub struct Featurizer {
    config: FeatureConfig,
    analyzer: SpectralAnalyzer,
    filterbank: MelFilterbank,
    dct: Dct,
}

impl Featurizer {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        let rate = config.sample_rate_hz;
        let layout = FrameLayout::new(config.frame_ms, config.hop_ms, rate)?;
        let analyzer = SpectralAnalyzer::new(layout);
        let filterbank = MelFilterbank::new(&config, analyzer.fft_size(), rate)?;
        let dct = Dct::new(config.n_mels, config.n_mfcc)?;
        Ok(Self {
            config,
            analyzer,
            filterbank,
            dct,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Hann, FFT, power, mel energies, natural log, DCT-II per frame.
    ///
    /// The clip is resampled to the configured rate first if needed.
    pub fn mfcc_frames(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        if clip.is_empty() {
            return Err(Error::EmptyInput("clip has no samples"));
        }
        let resampled;
        let clip = if clip.sample_rate_hz == self.config.sample_rate_hz {
            clip
        } else {
            resampled = crate::audio::resample(clip, self.config.sample_rate_hz)?;
            &resampled
        };
        let mut scratch = Vec::with_capacity(self.analyzer.fft_size());
        Ok(self
            .analyzer
            .layout()
            .frames(&clip.samples)
            .map(|frame| {
                let power = self.analyzer.frame_power(&frame, &mut scratch);
                let log_mel: Vec<f64> = self
                    .filterbank
                    .apply(&power)
                    .into_iter()
                    .map(|e| libm::log(e + LOG_FLOOR))
                    .collect();
                self.dct.transform(&log_mel)
            })
            .collect())
    }

    pub fn features(&self, clip: &AudioClip) -> Result<FeatureVector> {
        aggregate_features(&self.mfcc_frames(clip)?)
    }
}

/// One-shot MFCC matrix for a clip.
pub fn mfcc_frames(clip: &AudioClip, config: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    let config = FeatureConfig {
        sample_rate_hz: clip.sample_rate_hz,
        ..config.clone()
    };
    Featurizer::new(config)?.mfcc_frames(clip)
}
