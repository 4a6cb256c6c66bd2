//! Worst-case growth of plaintext coefficients through a compiled network.
//!
//! Every encoded value is a polynomial evaluated at 2. As long as its degree
//! stays below `n` no product wraps around, and every coefficient is bounded
//! by the polynomial's L1 norm, which is additive under sums and
//! submultiplicative under products. Decoding is exact while that norm stays
//! below half the product of the lane moduli.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::network::NetworkSpec;
use super::plan::{compile, CompiledNetwork, Scaled, SquareTerm, Step};
use crate::encode::{scaled_integer, FixedPointConfig};
use crate::error::{Error, Result};

/// Bounds on one encoded value.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Bound {
    l1: f64,
    degree: usize,
    magnitude: f64,
}

impl Bound {
    fn constant(s: &Scaled) -> Self {
        let m = s.value.magnitude();
        Self {
            l1: m.count_ones() as f64,
            degree: m.bits() as usize - 1,
            magnitude: s.value.to_f64().unwrap_or(f64::INFINITY).abs() / 2f64.powi(s.scale_exponent as i32),
        }
    }

    fn mul(self, o: Self) -> Self {
        Self {
            l1: self.l1 * o.l1,
            degree: self.degree + o.degree,
            magnitude: self.magnitude * o.magnitude,
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            l1: self.l1 + o.l1,
            degree: self.degree.max(o.degree),
            magnitude: self.magnitude + o.magnitude,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapacityReport {
    /// Scale exponent of the network output.
    pub scale_exponent: i64,
    /// Largest real magnitude any output can take.
    pub magnitude_bound: f64,
    /// log2 of the largest coefficient bound seen anywhere in the circuit.
    pub coeff_bound_log2: f64,
    /// Largest polynomial degree seen anywhere in the circuit.
    pub degree_bound: usize,
    /// log2 of the centered decoding limit `(T - 1) / 2`.
    pub capacity_log2: f64,
}

fn log2_big(v: &BigUint) -> f64 {
    let bits = v.bits();
    let shift = bits.saturating_sub(64);
    (v >> shift).to_f64().expect("fits").log2() + shift as f64
}

/// Checks that decoding stays exact for inputs with `|x| <= input_bound` at
/// ring degree `n`.
pub fn capacity_check(net: &NetworkSpec, cfg: &FixedPointConfig, input_bound: f64, n: usize) -> Result<CapacityReport> {
    let plan = compile(net, cfg.precision_bits)?;
    capacity_check_plan(&plan, cfg, input_bound, n)
}

pub fn capacity_check_plan(
    plan: &CompiledNetwork,
    cfg: &FixedPointConfig,
    input_bound: f64,
    n: usize,
) -> Result<CapacityReport> {
    if plan.precision_bits != cfg.precision_bits {
        return Err(Error::InvalidParams("plan and fixed-point precision differ".into()));
    }
    if !(input_bound >= 0.0 && input_bound.is_finite()) {
        return Err(Error::OutOfRange(format!("input bound {input_bound}")));
    }
    let half = (cfg.capacity() - 1u32) >> 1;
    let capacity_log2 = log2_big(&half);
    let half = half.to_f64().unwrap_or(f64::INFINITY);

    let z = scaled_integer(input_bound, plan.input_scale())?;
    let bits = z.bits().max(1) as usize;
    let input = Bound {
        l1: bits as f64,
        degree: bits - 1,
        magnitude: input_bound,
    };
    let mut x = vec![input; plan.input_shape.len()];
    let mut worst = input;

    for layer in &plan.layers {
        x = match &layer.step {
            Step::Linear { weights, outputs } => {
                let w: Vec<Bound> = weights.iter().map(Bound::constant).collect();
                outputs
                    .iter()
                    .map(|out| {
                        let acc = out
                            .terms
                            .iter()
                            .map(|&(i, wi)| x[i].mul(w[wi]))
                            .fold(Bound::default(), Bound::add);
                        out.bias.as_ref().map_or(acc, |b| acc.add(Bound::constant(b)))
                    })
                    .collect()
            }
            Step::Pool { windows, reciprocals } => windows
                .iter()
                .enumerate()
                .map(|(o, win)| {
                    let acc = win.iter().map(|&i| x[i]).fold(Bound::default(), Bound::add);
                    match reciprocals {
                        Some(r) => acc.mul(Bound::constant(&r[o])),
                        None => acc,
                    }
                })
                .collect(),
            Step::Activation {
                square,
                linear,
                constant,
            } => x
                .iter()
                .map(|&v| {
                    let mut acc = match square {
                        SquareTerm::Absent => Bound::default(),
                        SquareTerm::Unit => v.mul(v),
                        SquareTerm::Scaled(a2) => v.mul(v).mul(Bound::constant(a2)),
                    };
                    if let Some(a1) = linear {
                        acc = acc.add(v.mul(Bound::constant(a1)));
                    }
                    if let Some(a0) = constant {
                        acc = acc.add(Bound::constant(a0));
                    }
                    acc
                })
                .collect(),
        };
        for b in &x {
            worst.l1 = worst.l1.max(b.l1);
            worst.degree = worst.degree.max(b.degree);
            if b.degree >= n {
                return Err(Error::CapacityExceeded(format!(
                    "{}: encoded degree {} reaches ring degree {n}; lower the precision",
                    layer.name, b.degree
                )));
            }
            if b.l1 >= half {
                return Err(Error::CapacityExceeded(format!(
                    "{}: coefficients may reach 2^{:.1} but lanes hold 2^{capacity_log2:.1}; add a plaintext lane or lower the precision",
                    layer.name,
                    b.l1.log2()
                )));
            }
        }
    }
    Ok(CapacityReport {
        scale_exponent: plan.output_scale(),
        magnitude_bound: x.iter().map(|b| b.magnitude).fold(0.0, f64::max),
        coeff_bound_log2: worst.l1.log2(),
        degree_bound: worst.degree,
        capacity_log2,
    })
}

/// Shortest prefix of `candidates` whose product clears the capacity check.
pub fn select_lanes(
    net: &NetworkSpec,
    precision_bits: u32,
    input_bound: f64,
    n: usize,
    candidates: &[u64],
) -> Result<(Vec<u64>, CapacityReport)> {
    let plan = compile(net, precision_bits)?;
    let mut last = None;
    for k in 1..=candidates.len() {
        let cfg = FixedPointConfig::new(precision_bits, candidates[..k].to_vec())?;
        match capacity_check_plan(&plan, &cfg, input_bound, n) {
            Ok(report) => return Ok((candidates[..k].to_vec(), report)),
            Err(e @ Error::CapacityExceeded(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::CapacityExceeded("no candidate lanes".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::WeightTensor;
    use crate::engine::network::{Layer, Shape};

    fn cfg(t: &[u64]) -> FixedPointConfig {
        FixedPointConfig::new(15, t.to_vec()).unwrap()
    }

    #[test]
    fn empty_network() {
        let net = NetworkSpec::new(Shape::flat(4), vec![]).unwrap();
        let r = capacity_check(&net, &cfg(&[65537]), 1.5, 4096).unwrap();
        assert_eq!(r.scale_exponent, 15);
        assert_eq!(r.magnitude_bound, 1.5);
    }

    #[test]
    fn square_doubles_scale() {
        let net = NetworkSpec::new(
            Shape::flat(1),
            vec![Layer::PolyActivation {
                coeffs: vec![0.0, 0.0, 1.0],
            }],
        )
        .unwrap();
        let r = capacity_check(&net, &cfg(&[1099511922689]), 1.0, 4096).unwrap();
        assert_eq!(r.scale_exponent, 30);
        assert_eq!(r.magnitude_bound, 1.0);
        // 2^15 has 16 bits, so its square has an L1 bound of 256 and degree 30
        assert_eq!(r.coeff_bound_log2, 8.0);
        assert_eq!(r.degree_bound, 30);
    }

    #[test]
    fn overflow_asks_for_a_lane() {
        let w = WeightTensor::new(vec![1, 64], vec![0.5; 64]).unwrap();
        let sq = || Layer::PolyActivation {
            coeffs: vec![0.0, 0.0, 1.0],
        };
        let net = NetworkSpec::new(
            Shape::flat(64),
            vec![Layer::Dense { weights: w, bias: None }, sq(), sq()],
        )
        .unwrap();
        let err = capacity_check(&net, &cfg(&[40961]), 1.0, 4096).unwrap_err();
        assert!(err.to_string().contains("add a plaintext lane"));
        let (lanes, report) = select_lanes(&net, 15, 1.0, 4096, &[40961, 65537, 114689, 147457, 188417]).unwrap();
        assert!(report.coeff_bound_log2 < report.capacity_log2);
        assert!(lanes.len() > 1);
    }

    #[test]
    fn degree_limit() {
        let sq = || Layer::PolyActivation {
            coeffs: vec![0.0, 0.0, 1.0],
        };
        let net = NetworkSpec::new(Shape::flat(1), vec![sq(), sq(), sq()]).unwrap();
        // 16-bit inputs reach degree 8 * 15 = 120 after three squarings
        let err = capacity_check(&net, &cfg(&[1099511922689]), 1.0, 64).unwrap_err();
        assert!(err.to_string().contains("ring degree 64"));
        assert!(capacity_check(&net, &cfg(&[1099511922689]), 1.0, 128).is_ok());
    }
}
