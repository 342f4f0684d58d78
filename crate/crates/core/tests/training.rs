use birdcall_core::fixtures::{fixture_clip, FIXTURE_CLASSES};
use birdcall_core::mfcc::{FeatureConfig, Featurizer};
use birdcall_core::nn::{ModelConfig, Network};
use birdcall_core::train::{evaluate, stratified_split, train, Dataset, TrainingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RATE: u32 = 22_050;

fn fixture_dataset(per_class: u64, seconds: f64) -> Dataset {
    let featurizer = Featurizer::new(FeatureConfig {
        sample_rate_hz: RATE,
        ..FeatureConfig::default()
    })
    .unwrap();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for class in 0..FIXTURE_CLASSES.len() {
        for i in 0..per_class {
            let clip = fixture_clip(class, i, 21, seconds, RATE);
            features.push(featurizer.features(&clip).unwrap().0);
            labels.push(class);
        }
    }
    Dataset::new(features, labels).unwrap()
}

fn fresh_net(seed: u64) -> Network {
    Network::new(ModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn training_on_fixtures_converges_and_is_reproducible() {
    let data = fixture_dataset(16, 2.0);
    let split = stratified_split(&data.labels, 5, 0.25, 1).unwrap();
    let (train_set, test_set) = (data.subset(&split.train), data.subset(&split.test));

    let config = TrainingConfig {
        epochs: 100,
        seed: 1,
        ..TrainingConfig::default()
    };
    let net = fresh_net(1);
    let (_, pre_acc) = evaluate(&net, &test_set).unwrap();
    assert!(
        (0.10..=0.30).contains(&pre_acc),
        "pre-training accuracy {pre_acc}"
    );

    let (trained, history) = train(net.clone(), &train_set, &test_set, &config).unwrap();
    assert_eq!(history.len(), 100);
    let first = history.epochs.first().unwrap();
    let last = history.epochs.last().unwrap();
    assert!(
        last.train_loss < 0.5 * first.train_loss,
        "{} vs {}",
        last.train_loss,
        first.train_loss
    );
    assert!(
        last.val_acc >= pre_acc + 0.5,
        "val acc {} from {pre_acc}",
        last.val_acc
    );

    let (again, history_again) = train(net, &train_set, &test_set, &config).unwrap();
    assert_eq!(trained, again);
    assert_eq!(history, history_again);
}
