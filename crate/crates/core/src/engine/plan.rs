//! Networks lowered to per-output operation lists over public integers.
//!
//! All branching on weights happens here, before any ciphertext exists:
//! weights that round to zero at the working precision are dropped, so the
//! encrypted evaluator only walks fixed lists.

use num_bigint::BigInt;
use num_traits::Zero;

use super::hops::{HopCounter, HopTally};
use super::network::{dims2, dims4, fold_batchnorm, window_taps, Layer, NetworkSpec, Shape};
use crate::encode::{scaled_integer, DEFAULT_PRECISION_BITS};
use crate::error::{Error, Result};

/// Activation layers with a squared term the default parameters can afford.
pub const MAX_MUL_DEPTH: usize = 3;

/// A public constant already scaled to an integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scaled {
    pub value: BigInt,
    pub scale_exponent: i64,
}

impl Scaled {
    fn new(v: f64, scale_exponent: i64) -> Result<Option<Self>> {
        let value = scaled_integer(v, scale_exponent)?;
        Ok((!value.is_zero()).then_some(Self { value, scale_exponent }))
    }

    /// Whether the base-2 encoding has a single nonzero coefficient.
    pub fn is_monomial(&self) -> bool {
        let m = self.value.magnitude();
        m.count_ones() == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearOutput {
    /// `(input element, weight id)` for every weight that survives encoding.
    pub terms: Vec<(usize, usize)>,
    pub bias: Option<Scaled>,
}

/// Coefficient of the squared term.
#[derive(Clone, Debug, PartialEq)]
pub enum SquareTerm {
    Absent,
    /// Exactly one: the product is used as is.
    Unit,
    Scaled(Scaled),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Linear {
        weights: Vec<Scaled>,
        outputs: Vec<LinearOutput>,
    },
    Pool {
        windows: Vec<Vec<usize>>,
        /// One over each window's in-bounds count, when averaging.
        reciprocals: Option<Vec<Scaled>>,
    },
    Activation {
        square: SquareTerm,
        linear: Option<Scaled>,
        constant: Option<Scaled>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledLayer {
    pub name: String,
    pub input_scale: i64,
    pub output_scale: i64,
    pub output_shape: Shape,
    pub step: Step,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledNetwork {
    pub input_shape: Shape,
    pub precision_bits: u32,
    pub layers: Vec<CompiledLayer>,
}

impl CompiledNetwork {
    pub fn input_scale(&self) -> i64 {
        self.precision_bits as i64
    }

    pub fn output_scale(&self) -> i64 {
        self.layers.last().map_or(self.input_scale(), |l| l.output_scale)
    }

    pub fn output_shape(&self) -> Shape {
        self.layers.last().map_or(self.input_shape, |l| l.output_shape)
    }

    /// Operation counts predicted from the plan alone.
    pub fn projected_hops(&self) -> HopCounter {
        let mut c = HopCounter::default();
        for layer in &self.layers {
            c.push(layer.name.clone(), layer.step.tally(layer.output_shape.len()), 0.0);
        }
        c
    }
}

impl Step {
    fn tally(&self, nodes: usize) -> HopTally {
        let mut t = HopTally::default();
        match self {
            Step::Linear { weights, outputs } => {
                for out in outputs {
                    let m = out.terms.len() as u64;
                    t.pt_ct_mul += m;
                    t.fast_path_hits += out.terms.iter().filter(|&&(_, w)| weights[w].is_monomial()).count() as u64;
                    t.ct_ct_add += m.saturating_sub(1);
                    t.pt_ct_add += u64::from(m > 0 && out.bias.is_some());
                }
            }
            Step::Pool { windows, reciprocals } => {
                for w in windows {
                    t.ct_ct_add += w.len() as u64 - 1;
                }
                if let Some(r) = reciprocals {
                    t.pt_ct_mul += r.len() as u64;
                    t.fast_path_hits += r.iter().filter(|s| s.is_monomial()).count() as u64;
                }
            }
            Step::Activation {
                square,
                linear,
                constant,
            } => {
                let mut per = HopTally::default();
                let has_square = !matches!(square, SquareTerm::Absent);
                if has_square {
                    per.ct_ct_mul += 1;
                }
                if let SquareTerm::Scaled(s) = square {
                    per.pt_ct_mul += 1;
                    per.fast_path_hits += u64::from(s.is_monomial());
                }
                if let Some(l) = linear {
                    per.pt_ct_mul += 1;
                    per.fast_path_hits += u64::from(l.is_monomial());
                    per.ct_ct_add += u64::from(has_square);
                }
                if constant.is_some() && (has_square || linear.is_some()) {
                    per.pt_ct_add += 1;
                }
                t = per.scaled(nodes as u64);
            }
        }
        t
    }
}

/// Lowers `net` at the given precision. Batch-norm layers are folded first.
pub fn compile(net: &NetworkSpec, precision_bits: u32) -> Result<CompiledNetwork> {
    if precision_bits == 0 || precision_bits > 62 {
        return Err(Error::InvalidParams(format!("precision {precision_bits} not in 1..=62")));
    }
    let folded;
    let net = if net.layers.iter().any(|l| matches!(l, Layer::BatchNorm { .. })) {
        folded = fold_batchnorm(net)?;
        &folded
    } else {
        net
    };
    let depth = net.multiplicative_depth();
    if depth > MAX_MUL_DEPTH {
        return Err(Error::DepthExceeded {
            depth,
            budget: MAX_MUL_DEPTH,
        });
    }
    let p = precision_bits as i64;
    let shapes = net.shapes()?;
    let names = net.layer_names();
    let mut scale = p;
    let mut layers = Vec::with_capacity(net.layers.len());
    for (i, layer) in net.layers.iter().enumerate() {
        let (ins, outs) = (shapes[i], shapes[i + 1]);
        let (step, out_scale) = match layer {
            Layer::Conv2d {
                weights,
                bias,
                stride,
                padding,
            } => {
                let [_, cin, kh, kw] = dims4(&weights.shape)?;
                let (ids, encoded) = encode_weights(&weights.effective_values(), p)?;
                let bias = encode_bias(bias.as_deref(), outs.c, scale + p)?;
                let mut outputs = Vec::with_capacity(outs.len());
                for o in 0..outs.c {
                    for oy in 0..outs.h {
                        for ox in 0..outs.w {
                            let mut terms = Vec::new();
                            for (ky, kx, iy, ix) in window_taps(ins, oy, ox, kh, kw, *stride, *padding) {
                                for c in 0..cin {
                                    if let Some(w) = ids[((o * cin + c) * kh + ky) * kw + kx] {
                                        terms.push((ins.index(c, iy, ix), w));
                                    }
                                }
                            }
                            outputs.push(LinearOutput {
                                terms,
                                bias: bias[o].clone(),
                            });
                        }
                    }
                }
                (
                    Step::Linear {
                        weights: encoded,
                        outputs,
                    },
                    scale + p,
                )
            }
            Layer::Dense { weights, bias } => {
                let [out, fan_in] = dims2(&weights.shape)?;
                let (ids, encoded) = encode_weights(&weights.effective_values(), p)?;
                let bias = encode_bias(bias.as_deref(), out, scale + p)?;
                let outputs = (0..out)
                    .map(|o| LinearOutput {
                        terms: (0..fan_in).filter_map(|i| ids[o * fan_in + i].map(|w| (i, w))).collect(),
                        bias: bias[o].clone(),
                    })
                    .collect();
                (
                    Step::Linear {
                        weights: encoded,
                        outputs,
                    },
                    scale + p,
                )
            }
            Layer::ScaledAvgPool {
                window,
                stride,
                padding,
                reciprocal,
            } => {
                let mut windows = Vec::with_capacity(outs.len());
                for c in 0..outs.c {
                    for oy in 0..outs.h {
                        for ox in 0..outs.w {
                            windows.push(
                                window_taps(ins, oy, ox, *window, *window, *stride, *padding)
                                    .map(|(_, _, y, x)| ins.index(c, y, x))
                                    .collect::<Vec<_>>(),
                            );
                        }
                    }
                }
                let reciprocals = if *reciprocal {
                    Some(
                        windows
                            .iter()
                            .map(|w| Scaled::new(1.0 / w.len() as f64, p).map(|s| s.expect("reciprocal of a window count")))
                            .collect::<Result<Vec<_>>>()?,
                    )
                } else {
                    None
                };
                let out_scale = if *reciprocal { scale + p } else { scale };
                (Step::Pool { windows, reciprocals }, out_scale)
            }
            Layer::PolyActivation { coeffs } => {
                let c = |k: usize| coeffs.get(k).copied().unwrap_or(0.0);
                let (square, out_scale) = match c(2) {
                    0.0 => (SquareTerm::Absent, if c(1) != 0.0 { scale + p } else { scale }),
                    1.0 => (SquareTerm::Unit, 2 * scale),
                    a2 => match Scaled::new(a2, p)? {
                        Some(s) => (SquareTerm::Scaled(s), 2 * scale + p),
                        None => (SquareTerm::Absent, scale + p),
                    },
                };
                let linear = Scaled::new(c(1), out_scale - scale)?;
                let constant = Scaled::new(c(0), out_scale)?;
                (
                    Step::Activation {
                        square,
                        linear,
                        constant,
                    },
                    out_scale,
                )
            }
            Layer::BatchNorm { .. } => unreachable!("folded above"),
        };
        layers.push(CompiledLayer {
            name: names[i].clone(),
            input_scale: scale,
            output_scale: out_scale,
            output_shape: outs,
            step,
        });
        scale = out_scale;
    }
    Ok(CompiledNetwork {
        input_shape: net.input,
        precision_bits,
        layers,
    })
}

// Weight ids index `encoded`; None marks a weight that rounds to zero.
fn encode_weights(values: &[f64], p: i64) -> Result<(Vec<Option<usize>>, Vec<Scaled>)> {
    let mut encoded = Vec::new();
    let ids = values
        .iter()
        .map(|&v| {
            Ok(Scaled::new(v, p)?.map(|s| {
                encoded.push(s);
                encoded.len() - 1
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ids, encoded))
}

fn encode_bias(bias: Option<&[f64]>, out: usize, scale: i64) -> Result<Vec<Option<Scaled>>> {
    match bias {
        Some(b) => b.iter().map(|&v| Scaled::new(v, scale)).collect(),
        None => Ok(vec![None; out]),
    }
}

/// Static operation counts at the default precision.
pub fn project_hops(net: &NetworkSpec) -> Result<HopCounter> {
    project_hops_at(net, DEFAULT_PRECISION_BITS)
}

pub fn project_hops_at(net: &NetworkSpec, precision_bits: u32) -> Result<HopCounter> {
    Ok(compile(net, precision_bits)?.projected_hops())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::WeightTensor;

    fn dense(out: usize, fan_in: usize, v: f64, bias: bool) -> Layer {
        Layer::Dense {
            weights: WeightTensor::new(vec![out, fan_in], vec![v; out * fan_in]).unwrap(),
            bias: bias.then(|| vec![0.5; out]),
        }
    }

    #[test]
    fn empty_network_has_no_hops() {
        let net = NetworkSpec::new(Shape::flat(3), vec![]).unwrap();
        let c = project_hops(&net).unwrap();
        assert_eq!(c.totals(), HopTally::default());
        assert_eq!(compile(&net, 15).unwrap().output_scale(), 15);
    }

    #[test]
    fn dense_counting() {
        let net = NetworkSpec::new(Shape::flat(4), vec![dense(2, 4, 0.25, true)]).unwrap();
        let t = project_hops(&net).unwrap().totals();
        assert_eq!((t.pt_ct_mul, t.ct_ct_add, t.pt_ct_add, t.ct_ct_mul), (8, 6, 2, 0));
        assert_eq!(t.fast_path_hits, 8);
    }

    #[test]
    fn conv_counting() {
        let net = NetworkSpec::new(
            Shape::new(1, 3, 3),
            vec![Layer::Conv2d {
                weights: WeightTensor::new(vec![1, 1, 2, 2], vec![0.5, -0.25, 0.125, 1.0]).unwrap(),
                bias: Some(vec![0.1]),
                stride: 1,
                padding: 0,
            }],
        )
        .unwrap();
        let t = project_hops(&net).unwrap().totals();
        assert_eq!((t.pt_ct_mul, t.ct_ct_add, t.pt_ct_add), (16, 12, 4));
    }

    #[test]
    fn activation_counting_and_scales() {
        let act = |coeffs: Vec<f64>| {
            let net = NetworkSpec::new(Shape::flat(845), vec![Layer::PolyActivation { coeffs }]).unwrap();
            let plan = compile(&net, 15).unwrap();
            (plan.projected_hops().totals(), plan.output_scale())
        };
        let (sq, s) = act(vec![0.0, 0.0, 1.0]);
        assert_eq!(sq.ct_ct_mul, 845);
        assert_eq!(sq.total(), 845);
        assert_eq!(s, 30);
        let (full, s) = act(vec![0.0625, 0.5, 0.125]);
        assert_eq!(
            (full.ct_ct_mul, full.pt_ct_mul, full.ct_ct_add, full.pt_ct_add),
            (845, 2 * 845, 845, 845)
        );
        assert_eq!(full.fast_path_hits, 2 * 845);
        assert_eq!(s, 2 * 15 + 15);
        let (lin, s) = act(vec![0.0, 0.5]);
        assert_eq!((lin.pt_ct_mul, lin.total()), (845, 845));
        assert_eq!(s, 30);
    }

    #[test]
    fn zero_weights_are_elided() {
        let mut w = WeightTensor::new(vec![2, 4], vec![0.5, 0.0, 1e-9, -0.25, 0.0, 0.0, 0.0, 0.0]).unwrap();
        w.mask = vec![true, true, true, false, true, true, true, true];
        let net = NetworkSpec::new(Shape::flat(4), vec![Layer::Dense { weights: w, bias: None }]).unwrap();
        let plan = compile(&net, 15).unwrap();
        match &plan.layers[0].step {
            Step::Linear { outputs, .. } => {
                assert_eq!(outputs[0].terms, vec![(0, 0)]);
                assert!(outputs[1].terms.is_empty());
            }
            _ => panic!(),
        }
    }

    #[test]
    fn depth_budget() {
        let sq = || Layer::PolyActivation {
            coeffs: vec![0.0, 0.0, 1.0],
        };
        let net = NetworkSpec::new(Shape::flat(1), vec![sq(), sq(), sq(), sq()]).unwrap();
        assert!(matches!(compile(&net, 15), Err(Error::DepthExceeded { depth: 4, .. })));
    }
}
