//! Signal processing and learning core for bird call classification.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! only needs `alloc`: WAV bytes in, MFCC feature vectors, a dense softmax
//! classifier trained with Adam, one-vs-rest metrics, and windowed detection
//! reports out. File access, CLI and networking live in the `birdcall` crate.
//!
//! The processing chain for one recording:
//!
//! ```text
//! WAV bytes -> RawAudio -> normalize -> to_mono -> AudioClip
//!           -> segment (15 s) -> frames (40 ms / 20 ms) -> Hann -> FFT
//!           -> power -> mel filterbank -> ln -> DCT-II -> mean over frames
//!           -> 80-d FeatureVector -> Network (80-256-256-256-5) -> softmax
//! ```

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audio;
pub mod dsp;
mod error;
pub mod fixtures;
pub mod metrics;
pub mod mfcc;
pub mod nn;
pub mod pipeline;
pub mod train;

pub use error::{Error, Result};
