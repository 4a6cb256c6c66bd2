//! Reference networks: the two MNIST configurations used for operation
//! counting, and small random networks for end-to-end checks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::network::{Layer, NetworkSpec, Shape};
use crate::compress::{quant_bounds, quantize_to_pow2, SmallestExponentRule, WeightTensor, DEFAULT_K};
use crate::error::Result;

/// Reference power-of-two Swish approximation, ascending: `2^-4 + 2^-1 x + 2^-3 x^2`.
pub const SWISH_PSTAR: [f64; 3] = [0.0625, 0.5, 0.125];
pub const SQUARE: [f64; 3] = [0.0, 0.0, 1.0];

/// Surviving fraction per weight layer of the pruned configuration.
pub const MNIST_SPARSITY: [(&str, f64); 4] = [("conv-1", 0.1440), ("conv-2", 0.0701), ("dense-1", 0.0568), ("dense-2", 0.1480)];

/// Small NTT-friendly primes usable as plaintext lanes.
pub const SMALL_LANES: [u64; 15] = [
    40961, 65537, 114689, 147457, 188417, 270337, 286721, 319489, 417793, 557057, 638977, 737281, 778241, 786433,
    925697,
];

pub const MNIST_INPUT: Shape = Shape {
    c: 1,
    h: 28,
    w: 28,
};

struct MnistWeights {
    conv1: WeightTensor,
    conv2: WeightTensor,
    fc1: WeightTensor,
    fc2: WeightTensor,
    biases: [Vec<f64>; 4],
}

fn gaussian(rng: &mut ChaCha20Rng, shape: Vec<usize>, std: f64) -> WeightTensor {
    let d = Normal::new(0.0, std).expect("positive deviation");
    let n = shape.iter().product();
    WeightTensor::new(shape, (0..n).map(|_| d.sample(rng)).collect()).expect("shape matches")
}

fn mnist_weights(maps: usize, seed: u64) -> MnistWeights {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let fan = |n: usize| (2.0 / n as f64).sqrt();
    let mut bias = |n: usize| (0..n).map(|_| rng.random_range(-0.1..0.1)).collect::<Vec<f64>>();
    let biases = [bias(maps), bias(50), bias(100), bias(10)];
    MnistWeights {
        conv1: gaussian(&mut rng, vec![maps, 1, 5, 5], fan(25)),
        conv2: gaussian(&mut rng, vec![50, maps, 5, 5], fan(25 * maps)),
        fc1: gaussian(&mut rng, vec![100, 1250], fan(1250)),
        fc2: gaussian(&mut rng, vec![10, 100], fan(100)),
        biases,
    }
}

fn mnist_net(w: MnistWeights, act: [f64; 3]) -> NetworkSpec {
    let [b1, b2, b3, b4] = w.biases;
    let pool = || Layer::ScaledAvgPool {
        window: 3,
        stride: 1,
        padding: 1,
        reciprocal: false,
    };
    let activation = || Layer::PolyActivation { coeffs: act.to_vec() };
    NetworkSpec::new(
        MNIST_INPUT,
        vec![
            Layer::Conv2d {
                weights: w.conv1,
                bias: Some(b1),
                stride: 2,
                padding: 1,
            },
            activation(),
            pool(),
            Layer::Conv2d {
                weights: w.conv2,
                bias: Some(b2),
                stride: 2,
                padding: 0,
            },
            pool(),
            Layer::Dense {
                weights: w.fc1,
                bias: Some(b3),
            },
            activation(),
            Layer::Dense {
                weights: w.fc2,
                bias: Some(b4),
            },
        ],
    )
    .expect("fixed geometry")
}

/// Keeps the largest `round(fraction * N)` weights and snaps them to a
/// 5-bit power-of-two codebook.
pub fn prune_and_quantize(w: &WeightTensor, fraction: f64) -> Result<WeightTensor> {
    let keep = (fraction * w.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w.values[b].abs().total_cmp(&w.values[a].abs()).then(a.cmp(&b)));
    let mut mask = vec![false; w.len()];
    for &i in &order[..keep] {
        mask[i] = true;
    }
    let pruned = WeightTensor::with_mask(w.shape.clone(), w.values.clone(), mask)?;
    let spec = quant_bounds(&pruned, DEFAULT_K, SmallestExponentRule::Standard)?;
    quantize_to_pow2(&pruned, &spec, 1.0)
}

/// The dense network with square activations and the pruned, power-of-two
/// network with the Swish approximation, both with `maps` first-layer
/// feature maps and otherwise identical geometry.
pub fn build_mnist_configs(maps: usize, seed: u64) -> Result<(NetworkSpec, NetworkSpec)> {
    let dense = mnist_net(mnist_weights(maps, seed), SQUARE);
    let mut w = mnist_weights(maps, seed);
    w.conv1 = prune_and_quantize(&w.conv1, MNIST_SPARSITY[0].1)?;
    w.conv2 = prune_and_quantize(&w.conv2, MNIST_SPARSITY[1].1)?;
    w.fc1 = prune_and_quantize(&w.fc1, MNIST_SPARSITY[2].1)?;
    w.fc2 = prune_and_quantize(&w.fc2, MNIST_SPARSITY[3].1)?;
    Ok((dense, mnist_net(w, SWISH_PSTAR)))
}

/// Weight tensors of a network in layer order, with their layer labels.
pub fn weight_layers(net: &NetworkSpec) -> Vec<(String, &WeightTensor)> {
    net.layer_names()
        .into_iter()
        .zip(&net.layers)
        .filter_map(|(name, l)| match l {
            Layer::Conv2d { weights, .. } | Layer::Dense { weights, .. } => Some((name, weights)),
            _ => None,
        })
        .collect()
}

fn pow2_tensor(rng: &mut ChaCha20Rng, shape: Vec<usize>, keep: f64) -> WeightTensor {
    let n: usize = shape.iter().product();
    let values = (0..n)
        .map(|_| {
            let e = rng.random_range(-4..=0);
            let v = 2f64.powi(e);
            if rng.random_bool(0.5) {
                -v
            } else {
                v
            }
        })
        .collect();
    let kept = ((keep * n as f64).round() as usize).clamp(1, n);
    let mut mask = vec![false; n];
    for i in sample(rng, n, kept) {
        mask[i] = true;
    }
    WeightTensor::with_mask(shape, values, mask).expect("shape matches")
}

fn pow2_bias(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.random_range(0..3) {
            0 => 0.0,
            1 => 2f64.powi(rng.random_range(-5..=-2)),
            _ => -(2f64.powi(rng.random_range(-5..=-2))),
        })
        .collect()
}

fn pow2_activation(rng: &mut ChaCha20Rng) -> Vec<f64> {
    if rng.random_bool(0.5) {
        return SWISH_PSTAR.to_vec();
    }
    let mut term = |lo: i32, hi: i32| {
        let v = 2f64.powi(rng.random_range(lo..=hi));
        if rng.random_bool(0.25) {
            -v
        } else {
            v
        }
    };
    vec![term(-5, -2), term(-2, 0), term(-4, -1)]
}

/// A small random quantized network: at most three weight layers and 64
/// weights, one to three quadratic activations, inputs in `[-1, 1]`.
pub fn tiny_network(seed: u64) -> NetworkSpec {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let depth = 1 + (seed % 3) as usize;
    let mut layers = Vec::new();
    let (input, mut width) = if rng.random_bool(0.5) {
        // 1x4x4 image, two 3x3 kernels
        layers.push(Layer::Conv2d {
            weights: pow2_tensor(&mut rng, vec![2, 1, 3, 3], 0.8),
            bias: Some(pow2_bias(&mut rng, 2)),
            stride: 1,
            padding: 0,
        });
        (Shape::new(1, 4, 4), 8)
    } else {
        let fan_in = rng.random_range(4..=6);
        let out = rng.random_range(3..=5);
        layers.push(Layer::Dense {
            weights: pow2_tensor(&mut rng, vec![out, fan_in], 0.8),
            bias: Some(pow2_bias(&mut rng, out)),
        });
        (Shape::flat(fan_in), out)
    };
    layers.push(Layer::PolyActivation {
        coeffs: pow2_activation(&mut rng),
    });
    for i in 1..depth {
        // with three activations the last one produces the scores
        let next = if i == 2 { 3 } else { 4 };
        layers.push(Layer::Dense {
            weights: pow2_tensor(&mut rng, vec![next, width], 0.8),
            bias: Some(pow2_bias(&mut rng, next)),
        });
        layers.push(Layer::PolyActivation {
            coeffs: pow2_activation(&mut rng),
        });
        width = next;
    }
    if depth < 3 {
        layers.push(Layer::Dense {
            weights: pow2_tensor(&mut rng, vec![3, width], 1.0),
            bias: Some(pow2_bias(&mut rng, 3)),
        });
    }
    NetworkSpec::new(input, layers).expect("consistent shapes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::FixedPointConfig;
    use crate::engine::capacity::capacity_check;
    use crate::engine::plan::project_hops;
    use crate::fv::{DEFAULT_T, SECOND_T};

    #[test]
    fn mnist_geometry() {
        let (dense, faster) = build_mnist_configs(5, 1).unwrap();
        let shapes = dense.shapes().unwrap();
        assert_eq!(shapes[1], Shape::new(5, 13, 13));
        assert_eq!(shapes[4], Shape::new(50, 5, 5));
        assert_eq!(shapes.last().copied(), Some(Shape::flat(10)));
        assert_eq!(faster.shapes().unwrap(), shapes);
        let hops = project_hops(&dense).unwrap();
        let act1 = &hops.layers[1];
        assert_eq!(act1.layer, "act-1");
        assert_eq!(act1.tally.ct_ct_mul, 845);
        assert_eq!(act1.tally.total(), 845);
    }

    #[test]
    fn sparsities_match_reference_values() {
        let (_, faster) = build_mnist_configs(5, 1).unwrap();
        for ((name, w), (want_name, want)) in weight_layers(&faster).into_iter().zip(MNIST_SPARSITY) {
            assert_eq!(name, want_name);
            let got = w.nonzero() as f64 / w.len() as f64;
            assert_eq!((got * 1e4).round() / 1e4, want, "{name}: {got}");
            assert!(w.pow2_exponents().is_some());
        }
    }

    #[test]
    fn tiny_networks_fit_limits() {
        for seed in 0..50 {
            let net = tiny_network(seed);
            let weights: usize = weight_layers(&net).iter().map(|(_, w)| w.len()).sum();
            assert!(weights <= 64, "seed {seed}: {weights} weights");
            assert!(weight_layers(&net).len() <= 3);
            assert!((1..=3).contains(&net.multiplicative_depth()));
            assert_eq!(net.multiplicative_depth(), 1 + (seed % 3) as usize);
        }
    }

    #[test]
    fn mnist_capacity_needs_two_lanes() {
        let (dense, faster) = build_mnist_configs(5, 1).unwrap();
        let two = FixedPointConfig::new(15, vec![DEFAULT_T, SECOND_T]).unwrap();
        let r = capacity_check(&faster, &two, 1.0, 8192).unwrap();
        assert_eq!(r.scale_exponent, 240);
        assert!(r.coeff_bound_log2 < r.capacity_log2);
        let one = FixedPointConfig::new(15, vec![40961]).unwrap();
        assert!(capacity_check(&faster, &one, 1.0, 8192).is_err());
        let ratio = project_hops(&dense).unwrap().totals().total() as f64
            / project_hops(&faster).unwrap().totals().total() as f64;
        assert!((7.3..=10.9).contains(&ratio), "{ratio}");
    }
}

