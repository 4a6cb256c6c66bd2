//! Properties of the HOP counter against real encrypted evaluation.

use hopnet::compress::{prune_mask, WeightTensor};
use hopnet::engine::{
    compile, eval_lanes, encrypt_input, project_hops_at, select_lanes, tiny_network, HopTally, Layer, NetworkSpec,
    Shape, SMALL_LANES,
};
use hopnet::fv::{keygen, EncryptionParams, DEFAULT_LIMBS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const N: usize = 1024;
const PRECISION: u32 = 12;

fn classes(t: &HopTally) -> [u64; 4] {
    [t.pt_ct_add, t.ct_ct_add, t.pt_ct_mul, t.ct_ct_mul]
}

/// Encrypted counter of one inference on `net`.
fn encrypted_tally(net: &NetworkSpec, seed: u64) -> (HopTally, HopTally, u64) {
    let (lanes, _) = select_lanes(net, PRECISION, 1.0, N, &SMALL_LANES).unwrap();
    let params = EncryptionParams::new(N, &DEFAULT_LIMBS, &lanes, 1 << 32, 3.2).unwrap();
    let (_, pk, ek) = keygen(&params, seed);
    let plan = compile(net, PRECISION).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..net.input.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let inputs = encrypt_input(&pk, net.input, &x, PRECISION, &mut rng).unwrap();
    let (_, counter) = eval_lanes(&plan, &inputs, &ek).unwrap();
    (counter.totals(), plan.projected_hops().totals(), lanes.len() as u64)
}

/// Real-valued conv, pool and dense stack with every weight present.
fn real_network(seed: u64) -> NetworkSpec {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut values = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let maps = 2 + (seed % 3) as usize;
    let conv = WeightTensor::new(vec![maps, 1, 3, 3], values(maps * 9)).unwrap();
    let conv_bias = values(maps);
    let dense = WeightTensor::new(vec![3, maps * 4], values(3 * maps * 4)).unwrap();
    let dense_bias = values(3);
    NetworkSpec::new(
        Shape::new(1, 6, 6),
        vec![
            Layer::Conv2d { weights: conv, bias: Some(conv_bias), stride: 1, padding: 0 },
            Layer::PolyActivation { coeffs: vec![0.0625, 0.5, 0.125] },
            Layer::ScaledAvgPool { window: 2, stride: 2, padding: 0, reciprocal: seed.is_multiple_of(2) },
            Layer::Dense { weights: dense, bias: Some(dense_bias) },
        ],
    )
    .unwrap()
}

fn pruned(net: &NetworkSpec, keep: f64) -> NetworkSpec {
    let layers = net
        .layers
        .iter()
        .map(|l| match l {
            Layer::Conv2d { weights, bias, stride, padding } => Layer::Conv2d {
                weights: prune_mask(weights, keep).unwrap(),
                bias: bias.clone(),
                stride: *stride,
                padding: *padding,
            },
            Layer::Dense { weights, bias } => Layer::Dense { weights: prune_mask(weights, keep).unwrap(), bias: bias.clone() },
            other => other.clone(),
        })
        .collect();
    NetworkSpec::new(net.input, layers).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn counter_matches_projection(seed in 0u64..1000) {
        let net = tiny_network(seed);
        let (measured, projected, lanes) = encrypted_tally(&net, seed);
        prop_assert_eq!(classes(&measured), classes(&projected.scaled(lanes)));
        prop_assert_eq!(measured.fast_path_hits, projected.fast_path_hits * lanes);
    }

    #[test]
    fn quantized_nets_take_the_fast_path_everywhere(seed in 0u64..1000) {
        let (measured, _, _) = encrypted_tally(&tiny_network(seed), seed ^ 0x5a5a);
        prop_assert!(measured.pt_ct_mul > 0);
        prop_assert_eq!(measured.fast_path_hits, measured.pt_ct_mul);
    }
}

proptest! {
    #[test]
    fn raising_sparsity_never_adds_hops(seed in 0u64..10_000, a in 0.05f64..=1.0, b in 0.05f64..=1.0) {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let net = real_network(seed);
        let dense = project_hops_at(&pruned(&net, hi), PRECISION).unwrap();
        let sparse = project_hops_at(&pruned(&net, lo), PRECISION).unwrap();
        for ((_, d), (_, s)) in dense.tallies().iter().zip(sparse.tallies()) {
            for (x, y) in classes(d).iter().zip(classes(&s)) {
                prop_assert!(y <= *x, "keep {lo} vs {hi}: {s:?} > {d:?}");
            }
        }
    }
}

#[test]
fn pruned_weights_generate_no_multiplications() {
    let net = real_network(7);
    let full = project_hops_at(&net, PRECISION).unwrap();
    let half = project_hops_at(&pruned(&net, 0.5), PRECISION).unwrap();
    let nnz = |n: &NetworkSpec| -> usize {
        n.layers
            .iter()
            .map(|l| match l {
                Layer::Conv2d { weights, .. } | Layer::Dense { weights, .. } => weights.nonzero(),
                _ => 0,
            })
            .sum()
    };
    assert!(nnz(&pruned(&net, 0.5)) < nnz(&net));
    assert!(half.totals().pt_ct_mul < full.totals().pt_ct_mul);
}
