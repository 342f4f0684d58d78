//! Dataset manifests, stratified splitting and the mini-batch training loop.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{argmax, cross_entropy_label, AdamConfig, AdamState, Gradients, Mode, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: String,
}

/// Labelled audio files; labels are indexed in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    labels: Vec<String>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut labels: Vec<String> = Vec::new();
        for e in &entries {
            if e.label.trim().is_empty() {
                return Err(Error::InvalidArgument("empty label"));
            }
            if !seen.insert(e.path.as_str()) {
                return Err(Error::DuplicatePath(e.path.clone()));
            }
            if !labels.contains(&e.label) {
                labels.push(e.label.clone());
            }
        }
        Ok(Self { entries, labels })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Class index of every entry.
    pub fn class_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .map(|e| {
                self.label_index(&e.label)
                    .expect("label set built from entries")
            })
            .collect()
    }

    /// Sub-manifest keeping the parent's label order.
    fn subset(&self, indices: &[usize]) -> Self {
        Self {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub adam: AdamConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            test_fraction: 0.10,
            seed: 0,
            shuffle: true,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidArgument("test fraction must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class, `floor(test_fraction * n_c)` (at least 1) randomly chosen rows
/// go to the test side.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument("test fraction must be in (0, 1)"));
    }
    let mut by_class: Vec<Vec<usize>> = (0..n_classes).map(|_| Vec::new()).collect();
    for (i, &label) in labels.iter().enumerate() {
        by_class
            .get_mut(label)
            .ok_or(Error::LabelOutOfRange { label, n_classes })?
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::with_capacity(labels.len()),
        test: Vec::new(),
    };
    for (class, mut rows) in by_class.into_iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall(format!("class {class}")));
        }
        rows.shuffle(&mut rng);
        let n_test = (libm::floor(test_fraction * rows.len() as f64) as usize).max(1);
        split.test.extend_from_slice(&rows[..n_test]);
        split.train.extend_from_slice(&rows[n_test..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Stratified train/test manifests.
pub fn split_dataset(
    manifest: &DatasetManifest,
    config: &TrainingConfig,
) -> Result<(DatasetManifest, DatasetManifest)> {
    let classes = manifest.class_indices();
    for (i, label) in manifest.labels().iter().enumerate() {
        if classes.iter().filter(|&&c| c == i).count() < 2 {
            return Err(Error::ClassTooSmall(label.clone()));
        }
    }
    let split = stratified_split(
        &classes,
        manifest.labels().len(),
        config.test_fraction,
        config.seed,
    )?;
    Ok((manifest.subset(&split.train), manifest.subset(&split.test)))
}

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.len(),
                found: labels.len(),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

/// Mean inference-mode loss and accuracy.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        let p = net.predict(x)?;
        loss += cross_entropy_label(&p, y)?;
        correct += usize::from(argmax(&p) == y);
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Argmax class of every row.
pub fn predict_labels(net: &Network, data: &Dataset) -> Result<Vec<usize>> {
    data.features
        .iter()
        .map(|x| net.predict(x).map(|p| argmax(&p)))
        .collect()
}

/// Trains with Adam over seeded shuffled mini-batches.
///
/// Train loss and accuracy are running means over the epoch's training-mode
/// passes (dropout active); validation figures come from inference mode.
pub fn train(
    net: Network,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainingConfig,
) -> Result<(Network, TrainingHistory)> {
    train_with_progress(net, train_set, val_set, config, |_| {})
}

pub fn train_with_progress(
    mut net: Network,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainingConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Network, TrainingHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if let Some(x) = train_set
        .features
        .iter()
        .chain(&val_set.features)
        .find(|x| x.len() != net.n_inputs())
    {
        return Err(Error::LengthMismatch {
            expected: net.n_inputs(),
            found: x.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::for_network(&net, config.adam);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grads = Gradients::zeros_like(&net);
    let mut history = TrainingHistory::default();

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            grads.scale(0.0);
            for &i in batch {
                let y = train_set.labels[i];
                let pass = net.forward(&train_set.features[i], Mode::Train, &mut rng)?;
                loss_sum += cross_entropy_label(&pass.probs, y)?;
                correct += usize::from(argmax(&pass.probs) == y);
                net.backward_accumulate(&pass, y, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut net, &grads)?;
        }
        let n = train_set.len() as f64;
        let train_loss = loss_sum / n;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let (val_loss, val_acc) = if val_set.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            evaluate(&net, val_set)?
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc: correct as f64 / n,
            val_loss,
            val_acc,
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn manifest(counts: &[usize]) -> DatasetManifest {
        let mut entries = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                entries.push(ManifestEntry {
                    path: format!("c{c}/{i}.wav"),
                    label: format!("species-{c}"),
                });
            }
        }
        DatasetManifest::new(entries).unwrap()
    }

    #[test]
    fn manifest_validation() {
        let m = manifest(&[1, 1, 1, 1, 1]);
        assert_eq!(m.len(), 5);
        assert_eq!(m.labels().len(), 5);

        let dup = vec![
            ManifestEntry {
                path: "a.wav".into(),
                label: "x".into(),
            },
            ManifestEntry {
                path: "a.wav".into(),
                label: "y".into(),
            },
        ];
        assert_eq!(
            DatasetManifest::new(dup),
            Err(Error::DuplicatePath("a.wav".to_string()))
        );

        let blank = vec![ManifestEntry {
            path: "a.wav".into(),
            label: " ".into(),
        }];
        assert!(DatasetManifest::new(blank).is_err());
    }

    #[test]
    fn split_sizes_for_full_corpus() {
        let m = manifest(&[421, 421, 421, 421, 420]);
        assert_eq!(m.len(), 2104);
        let config = TrainingConfig {
            seed: 11,
            ..TrainingConfig::default()
        };
        let (train, test) = split_dataset(&m, &config).unwrap();
        assert_eq!(test.len(), 210);
        assert_eq!(train.len(), 1894);
    }

    #[test]
    fn split_is_deterministic_disjoint_and_stratified() {
        let m = manifest(&[30, 12, 7, 2, 50]);
        let config = TrainingConfig {
            seed: 3,
            ..TrainingConfig::default()
        };
        let (a_train, a_test) = split_dataset(&m, &config).unwrap();
        let (b_train, b_test) = split_dataset(&m, &config).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);

        let train_paths: BTreeSet<_> = a_train.entries().iter().map(|e| &e.path).collect();
        let test_paths: BTreeSet<_> = a_test.entries().iter().map(|e| &e.path).collect();
        assert!(train_paths.is_disjoint(&test_paths));
        assert_eq!(train_paths.len() + test_paths.len(), m.len());
        for label in m.labels() {
            assert!(a_train.entries().iter().any(|e| &e.label == label));
            assert!(a_test.entries().iter().any(|e| &e.label == label));
        }

        let other = TrainingConfig { seed: 4, ..config };
        let (_, c_test) = split_dataset(&m, &other).unwrap();
        assert_ne!(a_test, c_test);
        let count =
            |mm: &DatasetManifest, l: &str| mm.entries().iter().filter(|e| e.label == l).count();
        for label in m.labels() {
            assert_eq!(count(&a_test, label), count(&c_test, label));
        }
    }

    #[test]
    fn split_rejects_singleton_class() {
        let m = manifest(&[5, 1]);
        assert_eq!(
            split_dataset(&m, &TrainingConfig::default()),
            Err(Error::ClassTooSmall("species-1".to_string()))
        );
    }

    #[test]
    fn train_rejects_dimension_mismatch() {
        use crate::nn::ModelConfig;
        let net = Network::new(
            ModelConfig {
                layer_sizes: vec![3, 4, 2],
                dropout_rate: 0.0,
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let data = Dataset::new(vec![vec![0.0; 2]], vec![0]).unwrap();
        assert!(matches!(
            train(net, &data, &Dataset::default(), &TrainingConfig::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
