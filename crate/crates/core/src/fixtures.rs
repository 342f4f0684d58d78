//! Deterministic synthetic "species" for offline training and tests.
//!
//! Each class is a harmonic stack at its own fundamental, amplitude
//! modulated at its own rate. Individual clips get a small pitch jitter,
//! random phases and gain, plus Gaussian noise 20 dB below the signal RMS.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::audio::AudioClip;

pub const FIXTURE_SAMPLE_RATE_HZ: u32 = 44_100;
pub const FIXTURE_SECONDS: f64 = 15.0;
/// Noise amplitude relative to signal RMS (-20 dB).
pub const NOISE_RELATIVE_AMPLITUDE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSignature {
    pub label: &'static str,
    pub fundamental_hz: f64,
    /// Relative amplitude of harmonic `k + 1`; the fundamental is always 1.0.
    pub harmonics: &'static [f64],
    pub am_rate_hz: f64,
    /// Modulation depth in `[0, 1)`.
    pub am_depth: f64,
}

pub const FIXTURE_CLASSES: [ClassSignature; 5] = [
    ClassSignature {
        label: "Common Wood Pigeon",
        fundamental_hz: 520.0,
        harmonics: &[1.0, 0.45, 0.2],
        am_rate_hz: 1.5,
        am_depth: 0.8,
    },
    ClassSignature {
        label: "Eurasian Collared Dove",
        fundamental_hz: 1180.0,
        harmonics: &[1.0, 0.3],
        am_rate_hz: 3.0,
        am_depth: 0.6,
    },
    ClassSignature {
        label: "Great Tit",
        fundamental_hz: 2150.0,
        harmonics: &[1.0, 0.6, 0.4, 0.25],
        am_rate_hz: 5.0,
        am_depth: 0.9,
    },
    ClassSignature {
        label: "House Sparrow",
        fundamental_hz: 3350.0,
        harmonics: &[1.0],
        am_rate_hz: 8.0,
        am_depth: 0.5,
    },
    ClassSignature {
        label: "Lesser Spotted Woodpecker",
        fundamental_hz: 4800.0,
        harmonics: &[1.0, 0.25],
        am_rate_hz: 12.0,
        am_depth: 0.7,
    },
];

pub fn fixture_labels() -> impl Iterator<Item = &'static str> {
    FIXTURE_CLASSES.iter().map(|c| c.label)
}

struct Variation {
    pitch: f64,
    gain: f64,
    phases: Vec<f64>,
    am_phase: f64,
}

fn render(sig: &ClassSignature, n_samples: usize, rate: u32, var: &Variation) -> Vec<f64> {
    let rate = f64::from(rate);
    let f0 = sig.fundamental_hz * var.pitch;
    let nyquist = rate / 2.0;
    let norm: f64 = sig.harmonics.iter().sum();
    (0..n_samples)
        .map(|i| {
            let t = i as f64 / rate;
            let tone: f64 = sig
                .harmonics
                .iter()
                .enumerate()
                .map(|(k, &amp)| {
                    let f = f0 * (k + 1) as f64;
                    if f >= nyquist {
                        0.0
                    } else {
                        amp * libm::sin(2.0 * PI * f * t + var.phases[k])
                    }
                })
                .sum();
            let envelope = 1.0
                - sig.am_depth
                    * 0.5
                    * (1.0 - libm::cos(2.0 * PI * sig.am_rate_hz * t + var.am_phase));
            var.gain * envelope * tone / norm
        })
        .collect()
}

/// Noise-free, unjittered signature of a class.
pub fn clean_signature(class: usize, n_samples: usize, sample_rate_hz: u32) -> Vec<f64> {
    let sig = &FIXTURE_CLASSES[class];
    let var = Variation {
        pitch: 1.0,
        gain: 0.8,
        phases: alloc::vec![0.0; sig.harmonics.len()],
        am_phase: 0.0,
    };
    render(sig, n_samples, sample_rate_hz, &var)
}

/// The `index`-th clip of `class` for a given seed.
///
/// Every (seed, class, index) triple has its own random stream, so clips
/// can be generated in any order.
pub fn fixture_clip(
    class: usize,
    index: u64,
    seed: u64,
    seconds: f64,
    sample_rate_hz: u32,
) -> AudioClip {
    let sig = &FIXTURE_CLASSES[class];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64) << 40) | index);

    let var = Variation {
        pitch: rng.random_range(0.98..1.02),
        gain: rng.random_range(0.5..0.8),
        phases: (0..sig.harmonics.len())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect(),
        am_phase: rng.random_range(0.0..2.0 * PI),
    };
    let n = libm::round(seconds * f64::from(sample_rate_hz)) as usize;
    let mut samples = render(sig, n, sample_rate_hz, &var);
    let rms = libm::sqrt(samples.iter().map(|s| s * s).sum::<f64>() / n.max(1) as f64);
    let noise = Normal::new(0.0, NOISE_RELATIVE_AMPLITUDE * rms).expect("finite std");
    for s in &mut samples {
        *s = (*s + noise.sample(&mut rng)).clamp(-1.0, 1.0);
    }
    AudioClip {
        samples,
        sample_rate_hz,
    }
}
