//! Dense ReLU classifier with dropout, softmax output, backpropagation and Adam.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Probability floor used by [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Layer widths and dropout for a stack of dense layers.
///
/// Hidden layers are dense + ReLU + dropout; the last layer is dense + softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layer_sizes: Vec<usize>,
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    /// 80 MFCC inputs, three 256-unit hidden layers, five species.
    fn default() -> Self {
        Self {
            layer_sizes: vec![80, 256, 256, 256, 5],
            dropout_rate: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least input and output sizes",
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument("dropout rate must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    /// `(n_in + 1) * n_out` for each layer.
    pub fn layer_param_counts(&self) -> Vec<usize> {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_param_counts().iter().sum()
    }
}

/// Fully connected layer, weights row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (n_in + n_out) as f64);
        let weights = (0..n_in * n_out)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            n_in,
            n_out,
            weights,
            bias: vec![0.0; n_out],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_consistent(&self) -> bool {
        self.weights.len() == self.n_in * self.n_out && self.bias.len() == self.n_out
    }

    /// `W x + b`.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln p[target]` against a one-hot target, with `p` clipped to `[1e-12, 1]`.
pub fn cross_entropy(probs: &[f64], target: &[f64]) -> Result<f64> {
    if probs.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: probs.len(),
            found: target.len(),
        });
    }
    Ok(probs
        .iter()
        .zip(target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| -t * libm::log(p.clamp(PROB_FLOOR, 1.0)))
        .sum())
}

/// Cross-entropy for an integer class label.
pub fn cross_entropy_label(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::LabelOutOfRange {
        label,
        n_classes: probs.len(),
    })?;
    Ok(-libm::log(p.clamp(PROB_FLOOR, 1.0)))
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Activations kept from a training-mode forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Input seen by each layer (post-dropout for hidden layers).
    inputs: Vec<Vec<f64>>,
    /// Hidden pre-activations.
    pre_activations: Vec<Vec<f64>>,
    /// Per-unit dropout multiplier: 0 or `1 / (1 - rate)`.
    masks: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub probs: Vec<f64>,
    pub cache: Option<ForwardCache>,
}

/// Gradients shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Weights then bias, layer by layer.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: ModelConfig,
    pub layers: Vec<DenseLayer>,
}

impl Network {
    /// Freshly initialized network.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_sizes
            .windows(2)
            .map(|w| DenseLayer::glorot(w[0], w[1], rng))
            .collect();
        Ok(Self { config, layers })
    }

    /// Assembles a network from stored layers, checking shapes.
    pub fn from_layers(config: ModelConfig, layers: Vec<DenseLayer>) -> Result<Self> {
        config.validate()?;
        let expected = config.layer_sizes.len() - 1;
        if layers.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: layers.len(),
            });
        }
        for (layer, w) in layers.iter().zip(config.layer_sizes.windows(2)) {
            if layer.n_in != w[0] || layer.n_out != w[1] || !layer.is_consistent() {
                return Err(Error::LengthMismatch {
                    expected: (w[0] + 1) * w[1],
                    found: layer.param_count(),
                });
            }
        }
        Ok(Self { config, layers })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn n_inputs(&self) -> usize {
        self.config.n_inputs()
    }

    pub fn n_classes(&self) -> usize {
        self.config.n_classes()
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardPass> {
        if input.len() != self.n_inputs() {
            return Err(Error::LengthMismatch {
                expected: self.n_inputs(),
                found: input.len(),
            });
        }
        let (hidden, output) = self.layers.split_at(self.layers.len() - 1);
        let rate = self.config.dropout_rate;
        let keep_scale = 1.0 / (1.0 - rate);

        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(hidden.len()),
            masks: Vec::with_capacity(hidden.len()),
        };
        let mut x = input.to_vec();
        for layer in hidden {
            let z = layer.affine(&x);
            let mut a: Vec<f64> = z.iter().map(|&v| relu(v)).collect();
            if mode == Mode::Train {
                let mask: Vec<f64> = (0..a.len())
                    .map(|_| {
                        if rate > 0.0 && rng.random::<f64>() < rate {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect();
                a.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                cache.inputs.push(x);
                cache.pre_activations.push(z);
                cache.masks.push(mask);
            }
            x = a;
        }
        let logits = output[0].affine(&x);
        let probs = softmax(&logits);
        let cache = (mode == Mode::Train).then(|| {
            cache.inputs.push(x);
            cache
        });
        Ok(ForwardPass { probs, cache })
    }

    /// Deterministic inference.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        struct NoRng;
        impl rand::RngCore for NoRng {
            fn next_u32(&mut self) -> u32 {
                unreachable!("inference draws no random numbers")
            }
            fn next_u64(&mut self) -> u64 {
                unreachable!("inference draws no random numbers")
            }
            fn fill_bytes(&mut self, _: &mut [u8]) {
                unreachable!("inference draws no random numbers")
            }
        }
        Ok(self.forward(input, Mode::Infer, &mut NoRng)?.probs)
    }

    /// Gradients of cross-entropy w.r.t. every parameter for one sample.
    pub fn backward(&self, pass: &ForwardPass, target: usize) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_accumulate(pass, target, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Network::backward`] but adds into an existing buffer.
    pub fn backward_accumulate(
        &self,
        pass: &ForwardPass,
        target: usize,
        grads: &mut Gradients,
    ) -> Result<()> {
        let cache = pass.cache.as_ref().ok_or(Error::MissingCache)?;
        if target >= self.n_classes() {
            return Err(Error::LabelOutOfRange {
                label: target,
                n_classes: self.n_classes(),
            });
        }
        // softmax + cross-entropy: dL/dz = p - y
        let mut delta = pass.probs.clone();
        delta[target] -= 1.0;

        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &cache.inputs[li];
            let g = &mut grads.layers[li];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    row.iter_mut().zip(input).for_each(|(gw, x)| *gw += d * x);
                }
            }
            if li == 0 {
                break;
            }
            // Back through the previous hidden layer's dropout and ReLU.
            let z = &cache.pre_activations[li - 1];
            let mask = &cache.masks[li - 1];
            let mut prev = vec![0.0; layer.n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += w * d);
            }
            for ((p, &zv), &m) in prev.iter_mut().zip(z).zip(mask) {
                if zv <= 0.0 {
                    *p = 0.0;
                } else {
                    *p *= m;
                }
            }
            delta = prev;
        }
        Ok(())
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for each parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, slice_lens: impl IntoIterator<Item = usize>) -> Self {
        let m: Vec<Vec<f64>> = slice_lens.into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            config,
            t: 0,
            v: m.clone(),
            m,
        }
    }

    pub fn for_network(net: &Network, config: AdamConfig) -> Self {
        Self::new(
            config,
            net.layers
                .iter()
                .flat_map(|l| [l.weights.len(), l.bias.len()]),
        )
    }

    /// One bias-corrected update. Nothing is modified if any gradient is
    /// non-finite.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::LengthMismatch {
                expected: self.m.len(),
                found: params.len().min(grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::LengthMismatch {
                    expected: m.len(),
                    found: p.len().min(g.len()),
                });
            }
        }
        if grads.iter().flat_map(|g| g.iter()).any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }

        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let t = self.t as i32;
        let bias1 = 1.0 - libm::pow(beta1, f64::from(t));
        let bias2 = 1.0 - libm::pow(beta2, f64::from(t));
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        let g = grads.slices();
        self.update(&mut net.slices_mut(), &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_cases() {
        assert_eq!(relu(-3.0), 0.0);
        assert_eq!(relu(5.0), 5.0);
        assert_eq!(relu(0.0), 0.0);
    }

    #[test]
    fn softmax_cases() {
        let p = softmax(&[0.0; 5]);
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        let p = softmax(&[10.0, 0.0, 0.0, 0.0, 0.0]);
        let expected = 10f64.exp() / (10f64.exp() + 4.0);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!(p[0] > 0.9998);
        let p = softmax(&[1000.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn cross_entropy_cases() {
        let uniform = [0.2; 5];
        let target = [0.0, 0.0, 1.0, 0.0, 0.0];
        assert!((cross_entropy(&uniform, &target).unwrap() - 5f64.ln()).abs() < 1e-12);
        assert!(cross_entropy(&target, &target).unwrap() <= 1e-12);
        let miss = [1.0, 0.0, 0.0, 0.0, 0.0];
        let loss = cross_entropy(&miss, &target).unwrap();
        assert!((loss - 1e12f64.ln()).abs() < 1e-9);
        assert!((loss - 27.631).abs() < 1e-3);
        assert!(cross_entropy(&uniform, &[1.0]).is_err());
        assert_eq!(cross_entropy_label(&miss, 2).unwrap(), loss);
    }

    #[test]
    fn default_config_param_counts() {
        let config = ModelConfig::default();
        assert_eq!(config.layer_param_counts(), vec![20736, 65792, 65792, 1285]);
        let net = Network::new(config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(net.param_count(), 153_605);
    }

    #[test]
    fn inference_is_a_distribution_and_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::new(ModelConfig::default(), &mut rng).unwrap();
        let x: Vec<f64> = (0..80).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = net.predict(&x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(net.predict(&x).unwrap(), p);
        assert!(net.predict(&x[..79]).is_err());
    }

    #[test]
    fn output_delta_is_probs_minus_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let config = ModelConfig {
            layer_sizes: vec![3, 4, 3],
            dropout_rate: 0.0,
        };
        let net = Network::new(config, &mut rng).unwrap();
        let pass = net
            .forward(&[0.5, -0.2, 0.9], Mode::Train, &mut rng)
            .unwrap();
        let g = net.backward(&pass, 1).unwrap();
        let mut expected = pass.probs.clone();
        expected[1] -= 1.0;
        assert_eq!(g.layers[1].bias, expected);
    }

    #[test]
    fn dead_unit_gets_no_incoming_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let config = ModelConfig {
            layer_sizes: vec![3, 4, 2],
            dropout_rate: 0.0,
        };
        let mut net = Network::new(config, &mut rng).unwrap();
        net.layers[0].bias[2] = -100.0;
        let pass = net
            .forward(&[0.1, 0.2, 0.3], Mode::Train, &mut rng)
            .unwrap();
        let g = net.backward(&pass, 0).unwrap();
        assert!(g.layers[0].weights[2 * 3..3 * 3].iter().all(|&v| v == 0.0));
        assert_eq!(g.layers[0].bias[2], 0.0);
    }

    #[test]
    fn backward_requires_cache() {
        let net = Network::new(
            ModelConfig {
                layer_sizes: vec![2, 2],
                dropout_rate: 0.0,
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let pass = ForwardPass {
            probs: vec![0.5, 0.5],
            cache: None,
        };
        assert_eq!(net.backward(&pass, 0), Err(Error::MissingCache));
    }

    #[test]
    fn adam_first_step() {
        let mut state = AdamState::new(AdamConfig::default(), [1]);
        let mut p = [2.0];
        state.update(&mut [&mut p[..]], &[&[1.0][..]]).unwrap();
        let expected = 2.0 - 0.001 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut state = AdamState::new(AdamConfig::default(), [3]);
        let mut p = [1.0, -2.0, 0.5];
        state.update(&mut [&mut p[..]], &[&[0.0; 3][..]]).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut state = AdamState::new(AdamConfig::default(), [2]);
        let mut p = [1.0, 1.0];
        assert_eq!(
            state.update(&mut [&mut p[..]], &[&[f64::NAN, 0.0][..]]),
            Err(Error::NonFiniteGradient)
        );
        assert_eq!(state.t, 0);
        assert_eq!(p, [1.0, 1.0]);
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let config = ModelConfig {
            layer_sizes: vec![6, 32, 2],
            dropout_rate: 0.5,
        };
        let net = Network::new(config, &mut rng).unwrap();
        let x = [0.3, -0.1, 0.8, 0.5, -0.6, 0.2];
        let deterministic: f64 = net.layers[0].affine(&x).iter().map(|&z| relu(z)).sum();
        let n = 10_000;
        let mut total = 0.0;
        for _ in 0..n {
            let pass = net.forward(&x, Mode::Train, &mut rng).unwrap();
            total += pass.cache.unwrap().inputs[1].iter().sum::<f64>();
        }
        let mean = total / n as f64;
        assert!(((mean - deterministic) / deterministic).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            logits in proptest::collection::vec(-50.0f64..50.0, 1..10),
            c in -100.0f64..100.0,
        ) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = logits.iter().map(|v| v + c).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert_eq!(argmax(&p), argmax(&logits));
        }
    }
}
