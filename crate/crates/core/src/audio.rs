//! WAV decoding, amplitude normalization, channel mixing, resampling and
//! windowing of clips.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Integer PCM exactly as stored in the file, one sequence per channel.
///
/// 8-bit WAV is unsigned on disk; it is re-centred to signed here so every
/// depth shares the same `[-2^(b-1), 2^(b-1))` range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawAudio {
    pub channels: Vec<Vec<i32>>,
    pub bit_depth: u16,
    pub sample_rate_hz: u32,
}

impl RawAudio {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mono waveform with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

/// One window produced by [`segment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub index: usize,
    /// Offset of the first sample in the source clip.
    pub start_sample: usize,
    pub clip: AudioClip,
}

impl Window {
    pub fn start_seconds(&self) -> f64 {
        self.start_sample as f64 / f64::from(self.clip.sample_rate_hz)
    }

    pub fn end_seconds(&self) -> f64 {
        (self.start_sample + self.clip.len()) as f64 / f64::from(self.clip.sample_rate_hz)
    }
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(Error::MalformedHeader("fmt chunk shorter than 16 bytes"));
    }
    let mut tag = read_u16(body, 0);
    let channels = read_u16(body, 2);
    let sample_rate = read_u32(body, 4);
    let block_align = read_u16(body, 12);
    let bits = read_u16(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the sub-format GUID,
        // whose first two bytes carry the actual format tag.
        if body.len() < 26 {
            return Err(Error::MalformedHeader("extensible fmt chunk too short"));
        }
        tag = read_u16(body, 24);
    }
    if tag != FORMAT_PCM {
        return Err(Error::UnsupportedEncoding(tag));
    }
    if !matches!(bits, 8 | 16 | 24 | 32) {
        return Err(Error::UnsupportedBitDepth(bits));
    }
    if channels == 0 {
        return Err(Error::MalformedHeader("zero channels"));
    }
    if sample_rate == 0 {
        return Err(Error::MalformedHeader("zero sample rate"));
    }
    if usize::from(block_align) != usize::from(channels) * usize::from(bits / 8) {
        return Err(Error::MalformedHeader(
            "block alignment disagrees with channels and bit depth",
        ));
    }
    Ok(FmtChunk {
        channels,
        sample_rate,
        bits,
    })
}

/// Decodes a RIFF/WAVE container holding integer PCM.
pub fn decode_wav(bytes: &[u8]) -> Result<RawAudio> {
    if bytes.len() < 12 {
        return Err(Error::MalformedHeader("file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::MalformedHeader("missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedHeader("missing WAVE form type"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        match id {
            b"fmt " => {
                let end = body_start
                    .checked_add(size)
                    .filter(|&end| end <= bytes.len())
                    .ok_or(Error::MalformedHeader("fmt chunk runs past end of file"))?;
                fmt = Some(parse_fmt(&bytes[body_start..end])?);
            }
            b"data" => {
                let fmt = fmt.ok_or(Error::MalformedHeader("data chunk before fmt chunk"))?;
                if size == 0 {
                    return Err(Error::EmptyData);
                }
                let available = bytes.len() - body_start;
                if size > available {
                    return Err(Error::TruncatedData {
                        expected: size,
                        found: available,
                    });
                }
                return Ok(decode_samples(&bytes[body_start..body_start + size], &fmt));
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }
    if fmt.is_none() {
        Err(Error::MalformedHeader("missing fmt chunk"))
    } else {
        Err(Error::MalformedHeader("missing data chunk"))
    }
}

fn decode_samples(data: &[u8], fmt: &FmtChunk) -> RawAudio {
    let n_channels = usize::from(fmt.channels);
    let width = usize::from(fmt.bits / 8);
    let n_frames = data.len() / (width * n_channels);
    let mut channels = vec![Vec::with_capacity(n_frames); n_channels];
    for frame in data.chunks_exact(width * n_channels) {
        for (ch, s) in frame.chunks_exact(width).enumerate() {
            let value = match width {
                1 => i32::from(s[0]) - 128,
                2 => i32::from(i16::from_le_bytes([s[0], s[1]])),
                // Sign-extend by loading into the top three bytes.
                3 => i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8,
                _ => i32::from_le_bytes([s[0], s[1], s[2], s[3]]),
            };
            channels[ch].push(value);
        }
    }
    RawAudio {
        channels,
        bit_depth: fmt.bits,
        sample_rate_hz: fmt.sample_rate,
    }
}

/// Encodes mono samples in `[-1, 1]` as 16-bit PCM WAV.
///
/// Values are scaled by 32767 and rounded, then clamped.
pub fn encode_wav_pcm16(samples: &[f64], sample_rate_hz: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let q = libm::round(s * 32767.0).clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

/// Scales integer samples by `2^(bit_depth - 1)`, one output sequence per channel.
pub fn normalize(raw: &RawAudio) -> Result<Vec<Vec<f64>>> {
    if !matches!(raw.bit_depth, 8 | 16 | 24 | 32) {
        return Err(Error::UnsupportedBitDepth(raw.bit_depth));
    }
    let divisor = libm::ldexp(1.0, i32::from(raw.bit_depth) - 1);
    Ok(raw
        .channels
        .iter()
        .map(|ch| ch.iter().map(|&s| f64::from(s) / divisor).collect())
        .collect())
}

/// Averages channels sample by sample.
pub fn to_mono(channels: &[Vec<f64>]) -> Result<Vec<f64>> {
    let (first, rest) = channels
        .split_first()
        .ok_or(Error::EmptyInput("no channels"))?;
    for ch in rest {
        if ch.len() != first.len() {
            return Err(Error::LengthMismatch {
                expected: first.len(),
                found: ch.len(),
            });
        }
    }
    if rest.is_empty() {
        return Ok(first.clone());
    }
    let n = channels.len() as f64;
    Ok((0..first.len())
        .map(|i| channels.iter().map(|ch| ch[i]).sum::<f64>() / n)
        .collect())
}

/// Decodes, normalizes and mixes down in one step.
pub fn decode_clip(bytes: &[u8]) -> Result<AudioClip> {
    let raw = decode_wav(bytes)?;
    let mono = to_mono(&normalize(&raw)?)?;
    AudioClip::new(mono, raw.sample_rate_hz)
}

/// Linear-interpolation resampling.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip> {
    if target_rate_hz == 0 {
        return Err(Error::InvalidArgument(
            "target sample rate must be positive",
        ));
    }
    if target_rate_hz == clip.sample_rate_hz || clip.is_empty() {
        return Ok(AudioClip {
            samples: clip.samples.clone(),
            sample_rate_hz: target_rate_hz,
        });
    }
    let ratio = f64::from(clip.sample_rate_hz) / f64::from(target_rate_hz);
    let out_len = libm::round(clip.len() as f64 / ratio) as usize;
    let last = clip.len() - 1;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let lo = (libm::floor(pos) as usize).min(last);
            let hi = (lo + 1).min(last);
            let frac = pos - lo as f64;
            clip.samples[lo] + (clip.samples[hi] - clip.samples[lo]) * frac
        })
        .collect();
    Ok(AudioClip {
        samples,
        sample_rate_hz: target_rate_hz,
    })
}

fn seconds_to_samples(seconds: f64, rate: u32) -> usize {
    libm::round(seconds * f64::from(rate)) as usize
}

/// Keeps at most the first `max_seconds` of the clip.
pub fn trim(clip: &AudioClip, max_seconds: f64) -> Result<AudioClip> {
    if !(max_seconds > 0.0) {
        return Err(Error::InvalidArgument("trim length must be positive"));
    }
    let keep = seconds_to_samples(max_seconds, clip.sample_rate_hz).min(clip.len());
    Ok(AudioClip {
        samples: clip.samples[..keep].to_vec(),
        sample_rate_hz: clip.sample_rate_hz,
    })
}

/// Splits a clip into consecutive non-overlapping windows.
///
/// A trailing partial window survives only if it lasts at least
/// `min_tail_seconds`.
pub fn segment(
    clip: &AudioClip,
    window_seconds: f64,
    min_tail_seconds: f64,
) -> Result<Vec<Window>> {
    if !(window_seconds > 0.0) {
        return Err(Error::InvalidArgument("window length must be positive"));
    }
    let rate = clip.sample_rate_hz;
    let window_len = seconds_to_samples(window_seconds, rate).max(1);
    let min_tail = seconds_to_samples(min_tail_seconds.max(0.0), rate);
    let mut windows = Vec::with_capacity(clip.len() / window_len + 1);
    let mut start = 0;
    while start < clip.len() {
        let end = (start + window_len).min(clip.len());
        let len = end - start;
        if len < window_len && len < min_tail {
            break;
        }
        windows.push(Window {
            index: windows.len(),
            start_sample: start,
            clip: AudioClip {
                samples: clip.samples[start..end].to_vec(),
                sample_rate_hz: rate,
            },
        });
        start = end;
    }
    Ok(windows)
}
