//! File formats, command-line tools and the HTTP service around
//! [`birdcall_core`].

pub mod audio_file;
pub mod cli;
pub mod config;
mod error;
pub mod features;
pub mod fixtures;
pub mod history;
pub mod manifest;
pub mod model_file;
pub mod render;
pub mod report;
pub mod server;

pub use error::{Error, Result};
