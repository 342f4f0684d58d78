//! Synthetic training sets and long test recordings on disk.

use std::fs;
use std::path::Path;

use birdcall_core::audio::AudioClip;
use birdcall_core::fixtures::{
    fixture_clip, FIXTURE_CLASSES, FIXTURE_SAMPLE_RATE_HZ, FIXTURE_SECONDS,
};
use birdcall_core::train::{DatasetManifest, ManifestEntry};
use rayon::prelude::*;

use crate::audio_file::write_clip;
use crate::error::{Error, Result};
use crate::manifest::write_manifest;

pub const MANIFEST_NAME: &str = "manifest.csv";

/// Recordings draw from a stream index no training clip can reach.
const RECORDING_STREAM: u64 = 1 << 39;

/// `"Great Tit"` becomes `"great_tit"`.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `n_per_class` 15 s clips per fixture class plus `manifest.csv`
/// into `out_dir`. Output bytes depend only on the arguments.
pub fn generate_fixtures(n_per_class: usize, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    if n_per_class == 0 {
        return Err(
            birdcall_core::Error::InvalidArgument("need at least one clip per class").into(),
        );
    }
    fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let jobs: Vec<(usize, usize)> = (0..FIXTURE_CLASSES.len())
        .flat_map(|c| (0..n_per_class).map(move |i| (c, i)))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(class, index)| {
            let label = FIXTURE_CLASSES[class].label;
            let name = format!("{}_{index:04}.wav", slug(label));
            let clip = fixture_clip(
                class,
                index as u64,
                seed,
                FIXTURE_SECONDS,
                FIXTURE_SAMPLE_RATE_HZ,
            );
            write_clip(&out_dir.join(&name), &clip)?;
            Ok(ManifestEntry {
                path: name,
                label: label.to_owned(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(entries)?;
    write_manifest(&out_dir.join(MANIFEST_NAME), &manifest)?;
    Ok(manifest)
}

/// A long single-class recording built from the same signature as the
/// training clips of `class`.
pub fn synth_recording(class: usize, seconds: f64, seed: u64) -> Result<AudioClip> {
    if class >= FIXTURE_CLASSES.len() {
        return Err(birdcall_core::Error::LabelOutOfRange {
            label: class,
            n_classes: FIXTURE_CLASSES.len(),
        }
        .into());
    }
    if seconds.is_nan() || seconds <= 0.0 {
        return Err(
            birdcall_core::Error::InvalidArgument("recording length must be positive").into(),
        );
    }
    Ok(fixture_clip(
        class,
        RECORDING_STREAM,
        seed,
        seconds,
        FIXTURE_SAMPLE_RATE_HZ,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::load_manifest;

    #[test]
    fn slugs() {
        assert_eq!(
            slug("Lesser Spotted Woodpecker"),
            "lesser_spotted_woodpecker"
        );
    }

    #[test]
    fn writes_files_and_manifest_deterministically() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let m = generate_fixtures(2, 7, a.path()).unwrap();
        generate_fixtures(2, 7, b.path()).unwrap();
        assert_eq!(m.len(), 10);
        assert_eq!(m.labels().len(), 5);
        assert_eq!(load_manifest(&a.path().join(MANIFEST_NAME)).unwrap(), m);
        for e in m.entries() {
            let (x, y) = (
                fs::read(a.path().join(&e.path)).unwrap(),
                fs::read(b.path().join(&e.path)).unwrap(),
            );
            assert_eq!(x, y, "{}", e.path);
            assert_eq!(x.len(), 44 + 2 * 661_500);
        }
    }

    #[test]
    fn zero_per_class_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_fixtures(0, 1, dir.path()).is_err());
    }

    #[test]
    fn recording_length() {
        let clip = synth_recording(0, 4.0, 1).unwrap();
        assert_eq!(clip.len(), 4 * 44_100);
        assert!(synth_recording(5, 4.0, 1).is_err());
    }
}
