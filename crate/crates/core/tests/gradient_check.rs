use birdcall_core::nn::{cross_entropy_label, Mode, ModelConfig, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn loss(net: &Network, x: &[f64], y: usize) -> f64 {
    cross_entropy_label(&net.predict(x).unwrap(), y).unwrap()
}

/// Central differences over every parameter; returns the worst relative error.
fn max_relative_error(net: &Network, x: &[f64], y: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pass = net.forward(x, Mode::Train, &mut rng).unwrap();
    let grads = net.backward(&pass, y).unwrap();

    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for li in 0..net.layers.len() {
        let n_w = net.layers[li].weights.len();
        let n_b = net.layers[li].bias.len();
        for i in 0..n_w + n_b {
            let (orig, analytic) = if i < n_w {
                (net.layers[li].weights[i], grads.layers[li].weights[i])
            } else {
                (net.layers[li].bias[i - n_w], grads.layers[li].bias[i - n_w])
            };
            let set = |v: f64, p: &mut Network| {
                if i < n_w {
                    p.layers[li].weights[i] = v;
                } else {
                    p.layers[li].bias[i - n_w] = v;
                }
            };
            set(orig + STEP, &mut probe);
            let up = loss(&probe, x, y);
            set(orig - STEP, &mut probe);
            let down = loss(&probe, x, y);
            set(orig, &mut probe);
            let numeric = (up - down) / (2.0 * STEP);
            let denom = (analytic.abs() + numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let config = ModelConfig {
        layer_sizes: vec![4, 8, 3],
        dropout_rate: 0.0,
    };
    let net = Network::new(config, &mut rng).unwrap();
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = rng.random_range(0..3);
        let err = max_relative_error(&net, &x, y);
        assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn deeper_network_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let config = ModelConfig {
        layer_sizes: vec![5, 7, 6, 6, 4],
        dropout_rate: 0.0,
    };
    let mut net = Network::new(config, &mut rng).unwrap();
    for layer in &mut net.layers {
        for b in &mut layer.bias {
            *b = rng.random_range(-0.1..0.1);
        }
    }
    for _ in 0..5 {
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = max_relative_error(&net, &x, rng.random_range(0..4));
        assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn dropout_masks_are_reused_in_backward() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = ModelConfig {
        layer_sizes: vec![3, 10, 2],
        dropout_rate: 0.5,
    };
    let net = Network::new(config, &mut rng).unwrap();
    let x = [0.4, -0.7, 1.1];
    let pass = net
        .forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(77))
        .unwrap();
    let grads = net.backward(&pass, 1).unwrap();

    // Units dropped in the forward pass get no gradient on their outgoing weights.
    let w_out = &grads.layers[1].weights;
    let mut replay = ChaCha8Rng::seed_from_u64(77);
    let dropped: Vec<bool> = (0..10).map(|_| replay.random::<f64>() < 0.5).collect();
    assert!(dropped.iter().any(|&d| d));
    for (unit, &gone) in dropped.iter().enumerate() {
        if gone {
            assert_eq!(w_out[unit], 0.0);
            assert_eq!(w_out[10 + unit], 0.0);
        }
    }
}
