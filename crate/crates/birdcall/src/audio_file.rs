//! WAV files on disk.

use std::fs;
use std::path::Path;

use birdcall_core::audio::{decode_clip, encode_wav_pcm16, AudioClip};

use crate::error::{Error, Result};

pub fn read_clip(path: &Path) -> Result<AudioClip> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(decode_clip(&bytes)?)
}

/// Writes a mono 16-bit PCM WAV.
pub fn write_clip(path: &Path, clip: &AudioClip) -> Result<()> {
    fs::write(path, encode_wav_pcm16(&clip.samples, clip.sample_rate_hz)).map_err(Error::io(path))
}
