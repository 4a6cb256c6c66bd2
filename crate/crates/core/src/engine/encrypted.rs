use std::time::Instant;

use num_bigint::BigInt;
use rand::Rng;
use rayon::prelude::*;

use super::hops::{HopCounter, HopTally};
use super::network::Shape;
use super::plan::{CompiledNetwork, LinearOutput, Scaled, SquareTerm, Step};
use crate::encode::{decode_big, descale, encode_big, scaled_integer};
use crate::error::{Error, Result};
use crate::fv::{
    add_ct_assign, add_pt, decrypt_checked, encrypt, mul_ct, mul_pt_with, Ciphertext, EncryptionParams, EvalKeys,
    MulStrategy, Plaintext, PublicKey, SecretKey,
};

/// One ciphertext per scalar; every element shares lane and scale.
#[derive(Clone, Debug, PartialEq)]
pub struct CipherTensor {
    shape: Shape,
    elems: Vec<Ciphertext>,
}

impl CipherTensor {
    pub fn new(shape: Shape, elems: Vec<Ciphertext>) -> Result<Self> {
        if elems.len() != shape.len() || elems.is_empty() {
            return Err(Error::Shape(format!("{} ciphertexts for shape {shape}", elems.len())));
        }
        let (lane, scale) = (elems[0].lane(), elems[0].scale_exponent());
        for e in &elems[1..] {
            if e.lane() != lane {
                return Err(Error::LaneMismatch {
                    left: lane,
                    right: e.lane(),
                });
            }
            if e.scale_exponent() != scale {
                return Err(Error::ScaleMismatch {
                    left: scale,
                    right: e.scale_exponent(),
                });
            }
        }
        Ok(Self { shape, elems })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn elems(&self) -> &[Ciphertext] {
        &self.elems
    }

    pub fn into_elems(self) -> Vec<Ciphertext> {
        self.elems
    }

    pub fn lane(&self) -> usize {
        self.elems[0].lane()
    }

    pub fn scale_exponent(&self) -> i64 {
        self.elems[0].scale_exponent()
    }
}

// Counts every scheme call it makes.
struct Ops<'a> {
    params: &'a EncryptionParams,
    ek: &'a EvalKeys,
    lane: usize,
    strategy: MulStrategy,
    tally: HopTally,
}

impl<'a> Ops<'a> {
    fn new(ek: &'a EvalKeys, lane: usize, strategy: MulStrategy) -> Self {
        Self {
            params: ek.params(),
            ek,
            lane,
            strategy,
            tally: HopTally::default(),
        }
    }

    fn plain(&self, s: &Scaled) -> Result<Plaintext> {
        encode_big(self.params, self.lane, &s.value, s.scale_exponent)
    }

    fn mul_plain(&mut self, ct: &Ciphertext, s: &Scaled) -> Result<Ciphertext> {
        let m = self.plain(s)?;
        let out = mul_pt_with(self.params, ct, &m, self.strategy)?;
        self.tally.pt_ct_mul += 1;
        if self.strategy == MulStrategy::Auto && m.as_monomial(self.params.lane(self.lane)?.t).is_some() {
            self.tally.fast_path_hits += 1;
        }
        Ok(out)
    }

    fn add_plain(&mut self, ct: &Ciphertext, s: &Scaled) -> Result<Ciphertext> {
        let out = add_pt(self.params, ct, &self.plain(s)?)?;
        self.tally.pt_ct_add += 1;
        Ok(out)
    }

    fn add(&mut self, acc: &mut Ciphertext, b: &Ciphertext) -> Result<()> {
        add_ct_assign(acc, b)?;
        self.tally.ct_ct_add += 1;
        Ok(())
    }

    fn square(&mut self, ct: &Ciphertext) -> Result<Ciphertext> {
        let out = mul_ct(self.ek, ct, ct)?;
        self.tally.ct_ct_mul += 1;
        Ok(out)
    }

    // Noiseless constant for outputs no ciphertext reaches; not an operation.
    fn constant(&self, value: Option<&Scaled>, scale: i64) -> Result<Ciphertext> {
        let zero = BigInt::ZERO;
        let z = value.map_or(&zero, |s| &s.value);
        Ciphertext::trivial(self.params, &encode_big(self.params, self.lane, z, scale)?)
    }

    fn linear(&mut self, x: &[Ciphertext], weights: &[Scaled], out: &LinearOutput, scale: i64) -> Result<Ciphertext> {
        let mut acc: Option<Ciphertext> = None;
        for &(i, w) in &out.terms {
            let p = self.mul_plain(&x[i], &weights[w])?;
            match acc.as_mut() {
                Some(a) => self.add(a, &p)?,
                None => acc = Some(p),
            }
        }
        match (acc, &out.bias) {
            (Some(a), Some(b)) => self.add_plain(&a, b),
            (Some(a), None) => Ok(a),
            (None, b) => self.constant(b.as_ref(), scale),
        }
    }

    fn pool(&mut self, x: &[Ciphertext], window: &[usize], reciprocal: Option<&Scaled>) -> Result<Ciphertext> {
        let mut acc = x[window[0]].clone();
        for &i in &window[1..] {
            self.add(&mut acc, &x[i])?;
        }
        match reciprocal {
            Some(r) => self.mul_plain(&acc, r),
            None => Ok(acc),
        }
    }

    fn activation(
        &mut self,
        x: &Ciphertext,
        square: &SquareTerm,
        linear: Option<&Scaled>,
        constant: Option<&Scaled>,
        scale: i64,
    ) -> Result<Ciphertext> {
        let mut acc = match square {
            SquareTerm::Absent => None,
            SquareTerm::Unit => Some(self.square(x)?),
            SquareTerm::Scaled(a2) => {
                let sq = self.square(x)?;
                Some(self.mul_plain(&sq, a2)?)
            }
        };
        if let Some(a1) = linear {
            let l = self.mul_plain(x, a1)?;
            match acc.as_mut() {
                Some(a) => self.add(a, &l)?,
                None => acc = Some(l),
            }
        }
        match (acc, constant) {
            (Some(a), Some(c)) => self.add_plain(&a, c),
            (Some(a), None) => Ok(a),
            (None, c) => self.constant(c, scale),
        }
    }
}

/// Runs a compiled network over one lane of encrypted input. Output neurons
/// are evaluated in parallel with a private tally each, summed per layer.
pub fn eval_encrypted(
    plan: &CompiledNetwork,
    input: &CipherTensor,
    ek: &EvalKeys,
) -> Result<(CipherTensor, HopCounter)> {
    eval_encrypted_with(plan, input, ek, MulStrategy::Auto)
}

pub fn eval_encrypted_with(
    plan: &CompiledNetwork,
    input: &CipherTensor,
    ek: &EvalKeys,
    strategy: MulStrategy,
) -> Result<(CipherTensor, HopCounter)> {
    if input.shape() != plan.input_shape {
        return Err(Error::Shape(format!("input is {}, network expects {}", input.shape(), plan.input_shape)));
    }
    if input.scale_exponent() != plan.input_scale() {
        return Err(Error::ScaleMismatch {
            left: input.scale_exponent(),
            right: plan.input_scale(),
        });
    }
    let lane = input.lane();
    let mut counter = HopCounter::default();
    let mut x = input.elems.clone();
    for layer in &plan.layers {
        let start = Instant::now();
        let scale = layer.output_scale;
        let results: Vec<(Ciphertext, HopTally)> = match &layer.step {
            Step::Linear { weights, outputs } => outputs
                .par_iter()
                .map(|out| {
                    let mut ops = Ops::new(ek, lane, strategy);
                    Ok((ops.linear(&x, weights, out, scale)?, ops.tally))
                })
                .collect::<Result<_>>()?,
            Step::Pool { windows, reciprocals } => windows
                .par_iter()
                .enumerate()
                .map(|(o, w)| {
                    let mut ops = Ops::new(ek, lane, strategy);
                    Ok((ops.pool(&x, w, reciprocals.as_ref().map(|r| &r[o]))?, ops.tally))
                })
                .collect::<Result<_>>()?,
            Step::Activation {
                square,
                linear,
                constant,
            } => x
                .par_iter()
                .map(|xi| {
                    let mut ops = Ops::new(ek, lane, strategy);
                    Ok((
                        ops.activation(xi, square, linear.as_ref(), constant.as_ref(), scale)?,
                        ops.tally,
                    ))
                })
                .collect::<Result<_>>()?,
        };
        let tally = results.iter().map(|(_, t)| *t).sum();
        x = results.into_iter().map(|(c, _)| c).collect();
        counter.push(layer.name.clone(), tally, start.elapsed().as_secs_f64() * 1e3);
    }
    Ok((CipherTensor::new(plan.output_shape(), x)?, counter))
}

/// Encrypts `input` at `2^precision` once per lane.
pub fn encrypt_input<R: Rng + ?Sized>(
    pk: &PublicKey,
    shape: Shape,
    input: &[f64],
    precision_bits: u32,
    rng: &mut R,
) -> Result<Vec<CipherTensor>> {
    if input.len() != shape.len() {
        return Err(Error::Shape(format!("{} values for shape {shape}", input.len())));
    }
    let params = pk.params();
    let scale = precision_bits as i64;
    let ints = input.iter().map(|&v| scaled_integer(v, scale)).collect::<Result<Vec<_>>>()?;
    (0..params.lanes().len())
        .map(|lane| {
            let elems = ints
                .iter()
                .map(|z| encrypt(pk, &encode_big(params, lane, z, scale)?, rng))
                .collect::<Result<Vec<_>>>()?;
            CipherTensor::new(shape, elems)
        })
        .collect()
}

/// Decrypts one tensor per lane, recombines lanes and removes the scale.
pub fn decrypt_output(sk: &SecretKey, lanes: &[CipherTensor]) -> Result<Vec<f64>> {
    let params = sk.params();
    let t_lanes = params.t_lanes();
    if lanes.len() != t_lanes.len() {
        return Err(Error::Shape(format!("{} lane tensors for {} lanes", lanes.len(), t_lanes.len())));
    }
    for (j, l) in lanes.iter().enumerate() {
        if l.lane() != j {
            return Err(Error::LaneMismatch { left: j, right: l.lane() });
        }
        if l.shape() != lanes[0].shape() || l.scale_exponent() != lanes[0].scale_exponent() {
            return Err(Error::InconsistentLanes("lane tensors differ in shape or scale".into()));
        }
    }
    let scale = lanes[0].scale_exponent();
    (0..lanes[0].elems.len())
        .into_par_iter()
        .map(|i| {
            let plains = lanes
                .iter()
                .map(|l| decrypt_checked(sk, &l.elems[i]))
                .collect::<Result<Vec<_>>>()?;
            Ok(descale(&decode_big(&plains, &t_lanes)?, scale))
        })
        .collect()
}

/// Runs every lane and merges the per-lane counters.
pub fn eval_lanes(
    plan: &CompiledNetwork,
    inputs: &[CipherTensor],
    ek: &EvalKeys,
) -> Result<(Vec<CipherTensor>, HopCounter)> {
    let mut counter = HopCounter::default();
    let mut outs = Vec::with_capacity(inputs.len());
    for input in inputs {
        let (out, c) = eval_encrypted(plan, input, ek)?;
        counter.merge(&c);
        outs.push(out);
    }
    Ok((outs, counter))
}

#[derive(Clone, Debug)]
pub struct Inference {
    pub scores: Vec<f64>,
    pub hops: HopCounter,
}

impl Inference {
    pub fn argmax(&self) -> Option<usize> {
        argmax(&self.scores)
    }
}

/// Index of the largest score; the first one on ties.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Encrypt, evaluate and decrypt in one process.
pub fn infer_local<R: Rng + ?Sized>(
    plan: &CompiledNetwork,
    sk: &SecretKey,
    pk: &PublicKey,
    ek: &EvalKeys,
    input: &[f64],
    rng: &mut R,
) -> Result<Inference> {
    let cts = encrypt_input(pk, plan.input_shape, input, plan.precision_bits, rng)?;
    let (outs, hops) = eval_lanes(plan, &cts, ek)?;
    Ok(Inference {
        scores: decrypt_output(sk, &outs)?,
        hops,
    })
}
