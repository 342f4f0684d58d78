//! Framing, windowing, radix-2 FFT and power spectrograms.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::audio::AudioClip;
use crate::{Error, Result};

pub const DEFAULT_FRAME_MS: f64 = 40.0;
pub const DEFAULT_HOP_MS: f64 = 20.0;

/// Smallest power of two `>= n` (and at least 1).
pub fn next_power_of_two(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// `n`-point DFT of a real signal, zero-padded to `n`.
///
/// Iterative decimation-in-time radix-2 Cooley-Tukey.
pub fn fft(signal: &[f64], n: usize) -> Result<Vec<Complex64>> {
    if signal.len() > n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: signal.len(),
        });
    }
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    fft_in_place(&mut buf)?;
    Ok(buf)
}

/// In-place forward FFT over a complex buffer whose length is a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) -> Result<()> {
    let n = buf.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let bits = n.trailing_zeros();
    if bits > 0 {
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
    }

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| {
                let angle = step * k as f64;
                Complex64::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        for block in buf.chunks_exact_mut(len) {
            let (lo, hi) = block.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// Frame and hop lengths in samples for a given rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub frame_len: usize,
    pub hop: usize,
}

impl FrameLayout {
    pub fn new(frame_ms: f64, hop_ms: f64, sample_rate_hz: u32) -> Result<Self> {
        if !(frame_ms > 0.0) {
            return Err(Error::InvalidArgument("frame length must be positive"));
        }
        if !(hop_ms > 0.0 && hop_ms <= frame_ms) {
            return Err(Error::InvalidArgument("hop must be in (0, frame length]"));
        }
        let rate = f64::from(sample_rate_hz);
        let frame_len = libm::round(frame_ms * rate / 1000.0) as usize;
        let hop = libm::round(hop_ms * rate / 1000.0) as usize;
        if frame_len == 0 || hop == 0 {
            return Err(Error::InvalidArgument(
                "frame or hop rounds to zero samples",
            ));
        }
        Ok(Self { frame_len, hop })
    }

    /// Number of frames for a signal of `len` samples (signals shorter than a
    /// frame still produce one zero-padded frame).
    pub fn frame_count(&self, len: usize) -> usize {
        if len <= self.frame_len {
            1
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }

    pub fn fft_size(&self) -> usize {
        next_power_of_two(self.frame_len)
    }

    /// Borrowing iterator over frames; the short-signal frame is padded.
    pub fn frames<'a>(&self, samples: &'a [f64]) -> impl Iterator<Item = Vec<f64>> + 'a {
        let FrameLayout { frame_len, hop } = *self;
        let count = self.frame_count(samples.len());
        (0..count).map(move |i| {
            let start = i * hop;
            let end = (start + frame_len).min(samples.len());
            let mut frame = samples[start..end].to_vec();
            frame.resize(frame_len, 0.0);
            frame
        })
    }
}

/// Splits a clip into overlapping frames.
pub fn frame_signal(clip: &AudioClip, frame_ms: f64, hop_ms: f64) -> Result<Vec<Vec<f64>>> {
    if clip.is_empty() {
        return Err(Error::EmptyInput("signal has no samples"));
    }
    let layout = FrameLayout::new(frame_ms, hop_ms, clip.sample_rate_hz)?;
    Ok(layout.frames(&clip.samples).collect())
}

/// Periodic Hann coefficients `0.5 * (1 - cos(2*pi*k/N))`.
pub fn hann_coefficients(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 * (1.0 - libm::cos(2.0 * PI * k as f64 / n as f64)))
        .collect()
}

pub fn hann_window(frame: &[f64]) -> Vec<f64> {
    frame
        .iter()
        .zip(hann_coefficients(frame.len()))
        .map(|(x, w)| x * w)
        .collect()
}

/// `|X[k]|^2` for `k` in `0..=n/2`.
pub fn power_spectrum(spectrum: &[Complex64]) -> Vec<f64> {
    let n_bins = spectrum.len() / 2 + 1;
    spectrum
        .iter()
        .take(n_bins)
        .map(Complex64::norm_sqr)
        .collect()
}

/// Framewise power spectra of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    /// `n_frames` rows of `n_bins` values each.
    pub frames: Vec<Vec<f64>>,
    pub frame_len_samples: usize,
    pub hop_samples: usize,
    pub fft_size: usize,
    pub sample_rate_hz: u32,
}

impl PowerSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * f64::from(self.sample_rate_hz) / self.fft_size as f64
    }
}

/// Reusable window + transform for a fixed frame layout.
#[derive(Debug, Clone)]
pub struct SpectralAnalyzer {
    layout: FrameLayout,
    window: Vec<f64>,
    fft_size: usize,
}

impl SpectralAnalyzer {
    pub fn new(layout: FrameLayout) -> Self {
        Self {
            layout,
            window: hann_coefficients(layout.frame_len),
            fft_size: layout.fft_size(),
        }
    }

    pub fn layout(&self) -> FrameLayout {
        self.layout
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    /// Windowed power spectrum of one frame of `frame_len` samples.
    pub fn frame_power(&self, frame: &[f64], scratch: &mut Vec<Complex64>) -> Vec<f64> {
        scratch.clear();
        scratch.extend(
            frame
                .iter()
                .zip(&self.window)
                .map(|(x, w)| Complex64::new(x * w, 0.0)),
        );
        scratch.resize(self.fft_size, Complex64::new(0.0, 0.0));
        fft_in_place(scratch).expect("fft size is a power of two");
        power_spectrum(scratch)
    }

    pub fn spectrogram(&self, clip: &AudioClip) -> Result<PowerSpectrogram> {
        if clip.is_empty() {
            return Err(Error::EmptyInput("signal has no samples"));
        }
        let mut scratch = Vec::with_capacity(self.fft_size);
        let frames = self
            .layout
            .frames(&clip.samples)
            .map(|frame| self.frame_power(&frame, &mut scratch))
            .collect();
        Ok(PowerSpectrogram {
            frames,
            frame_len_samples: self.layout.frame_len,
            hop_samples: self.layout.hop,
            fft_size: self.fft_size,
            sample_rate_hz: clip.sample_rate_hz,
        })
    }
}

/// Hann-windowed power spectrogram with the given frame and hop.
pub fn spectrogram(clip: &AudioClip, frame_ms: f64, hop_ms: f64) -> Result<PowerSpectrogram> {
    let layout = FrameLayout::new(frame_ms, hop_ms, clip.sample_rate_hz)?;
    SpectralAnalyzer::new(layout).spectrogram(clip)
}

/// Converts power to decibels with a small floor for silent bins.
pub fn power_to_db(power: f64) -> f64 {
    10.0 * libm::log10(power + 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct O(n^2) summation; independent of the butterfly code path.
    fn naive_dft(x: &[f64], n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let angle = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    acc += Complex64::new(v * angle.cos(), v * angle.sin());
                }
                acc
            })
            .collect()
    }

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn fft_small_cases() {
        let dc = fft(&[1.0; 4], 4).unwrap();
        assert!(
            max_abs_diff(
                &dc,
                &[Complex64::new(4.0, 0.0), 0.0.into(), 0.0.into(), 0.0.into()]
            ) < 1e-15
        );
        let imp = fft(&[1.0, 0.0, 0.0, 0.0], 4).unwrap();
        assert!(imp
            .iter()
            .all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(fft(&[1.0], 1).unwrap(), vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn fft_rejects_bad_sizes() {
        assert_eq!(fft(&[], 0), Err(Error::NotPowerOfTwo(0)));
        assert_eq!(fft(&[1.0], 6), Err(Error::NotPowerOfTwo(6)));
        assert!(matches!(
            fft(&[1.0; 5], 4),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fft_matches_naive_dft_on_random_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = max_abs_diff(&fft(&x, 64).unwrap(), &naive_dft(&x, 64));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn fft_zero_pads_short_input() {
        let x = [0.5, -0.25, 1.0];
        let err = max_abs_diff(&fft(&x, 8).unwrap(), &naive_dft(&x, 8));
        assert!(err < 1e-12);
    }

    #[test]
    fn frame_counts() {
        let clip = AudioClip::new(vec![0.1; 1000], 1000).unwrap();
        let frames = frame_signal(&clip, 40.0, 20.0).unwrap();
        assert_eq!(frames.len(), 49);
        assert!(frames.iter().all(|f| f.len() == 40));

        let exact = AudioClip::new(vec![0.1; 40], 1000).unwrap();
        assert_eq!(frame_signal(&exact, 40.0, 20.0).unwrap().len(), 1);

        let short = AudioClip::new(vec![1.0; 10], 1000).unwrap();
        let frames = frame_signal(&short, 40.0, 20.0).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].len(), 40);
        assert_eq!(&frames[0][..10], &[1.0; 10]);
        assert!(frames[0][10..].iter().all(|&v| v == 0.0));

        let empty = AudioClip::new(vec![], 1000).unwrap();
        assert!(matches!(
            frame_signal(&empty, 40.0, 20.0),
            Err(Error::EmptyInput(_))
        ));
        assert!(frame_signal(&clip, 40.0, 50.0).is_err());
        assert!(frame_signal(&clip, 40.0, 0.0).is_err());
    }

    #[test]
    fn hann_values() {
        let w = hann_window(&[1.0; 4]);
        let expected = [0.0, 0.5, 1.0, 0.5];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(hann_window(&[0.7, 0.2, 0.1])[0], 0.0);
        assert_eq!(hann_window(&[0.0; 8]), vec![0.0; 8]);
    }

    #[test]
    fn power_spectrum_cases() {
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        assert_eq!(power_spectrum(&zero), vec![0.0; 5]);
        let dc = fft(&[1.0; 4], 4).unwrap();
        let p = power_spectrum(&dc);
        assert_eq!(p.len(), 3);
        assert!((p[0] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = fft(&x, 256).unwrap();
        let freq_energy: f64 = spec.iter().map(Complex64::norm_sqr).sum();
        let time_energy: f64 = 256.0 * x.iter().map(|v| v * v).sum::<f64>();
        assert!(((freq_energy - time_energy) / time_energy).abs() < 1e-9);
    }

    #[test]
    fn tone_peaks_at_expected_bin() {
        let rate = 8000;
        let clip = AudioClip::new(
            (0..8000)
                .map(|i| (2.0 * PI * 440.0 * i as f64 / rate as f64).sin())
                .collect(),
            rate,
        )
        .unwrap();
        let spec = spectrogram(&clip, 40.0, 20.0).unwrap();
        assert_eq!(spec.fft_size, 512);
        let expected = libm::round(440.0 * spec.fft_size as f64 / rate as f64) as usize;
        for frame in &spec.frames {
            let peak = frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(peak, expected);
        }
    }

    fn circular_convolution(h: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| (0..n).map(|j| h[j] * x[(n + i - j) % n]).sum())
            .collect()
    }

    proptest! {
        #[test]
        fn convolution_theorem(seed in any::<u64>(), log_n in 1u32..8) {
            let n = 1usize << log_n;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = fft(&circular_convolution(&h, &x), n).unwrap();
            let fh = fft(&h, n).unwrap();
            let fx = fft(&x, n).unwrap();
            let rhs: Vec<Complex64> = fh.iter().zip(&fx).map(|(a, b)| a * b).collect();
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-6);
        }

        #[test]
        fn real_input_is_conjugate_symmetric(seed in any::<u64>(), log_n in 1u32..10) {
            let n = 1usize << log_n;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let spec = fft(&x, n).unwrap();
            prop_assert!(spec[0].im.abs() < 1e-12);
            for k in 1..n {
                prop_assert!((spec[k] - spec[n - k].conj()).norm() < 1e-9);
            }
        }

        #[test]
        fn fft_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let n = 128;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = fft(&mix, n).unwrap();
            let fx = fft(&x, n).unwrap();
            let fy = fft(&y, n).unwrap();
            let rhs: Vec<Complex64> = fx.iter().zip(&fy).map(|(p, q)| p * a + q * b).collect();
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
        }

        #[test]
        fn frame_count_formula(frame in 1usize..200, hop_frac in 1usize..=100, extra in 0usize..5000) {
            let hop = (frame * hop_frac / 100).max(1);
            let len = frame + extra;
            let layout = FrameLayout { frame_len: frame, hop };
            let frames: Vec<_> = layout.frames(&vec![0.0; len]).collect();
            prop_assert_eq!(frames.len(), (len - frame) / hop + 1);
            prop_assert!(frames.iter().all(|f| f.len() == frame));
        }
    }
}
