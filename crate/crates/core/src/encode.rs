//! Fixed-point reals to plaintext polynomials and back.
//!
//! An integer `z` is written in binary and each set bit of `|z|` becomes a
//! coefficient `1` (or `t - 1` when `z < 0`), so evaluating the centered
//! polynomial at `x = 2` gives back `z`. Reals are scaled by `2^precision`
//! first and the exponent travels with the ciphertext.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::fv::{EncryptionParams, Plaintext};

pub const DEFAULT_PRECISION_BITS: u32 = 15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedPointConfig {
    pub precision_bits: u32,
    pub t_lanes: Vec<u64>,
}

impl FixedPointConfig {
    pub fn new(precision_bits: u32, t_lanes: Vec<u64>) -> Result<Self> {
        if precision_bits == 0 || precision_bits > 62 {
            return Err(Error::InvalidParams(format!("precision {precision_bits} not in 1..=62")));
        }
        if t_lanes.is_empty() {
            return Err(Error::InvalidParams("no plaintext moduli".into()));
        }
        Ok(Self {
            precision_bits,
            t_lanes,
        })
    }

    pub fn for_params(params: &EncryptionParams, precision_bits: u32) -> Result<Self> {
        Self::new(precision_bits, params.t_lanes())
    }

    /// Product of all plaintext moduli.
    pub fn capacity(&self) -> BigUint {
        self.t_lanes.iter().fold(BigUint::one(), |acc, &t| acc * t)
    }
}

/// One plaintext per lane, all at the same scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedValue {
    pub polys: Vec<Plaintext>,
    pub scale_exponent: i64,
}

/// Base-2 coefficients of `z` modulo `t`.
pub fn integer_coeffs(z: &BigInt, t: u64, n: usize) -> Result<Vec<u64>> {
    let bits = z.bits() as usize;
    if bits > n {
        return Err(Error::Overflow(bits as u32));
    }
    let set = if z.sign() == Sign::Minus { t - 1 } else { 1 };
    let mag = z.magnitude();
    Ok((0..n)
        .map(|i| if i < bits && mag.bit(i as u64) { set } else { 0 })
        .collect())
}

pub fn encode_integer(params: &EncryptionParams, lane: usize, z: i64, scale_exponent: i64) -> Result<Plaintext> {
    encode_big(params, lane, &BigInt::from(z), scale_exponent)
}

pub fn encode_big(params: &EncryptionParams, lane: usize, z: &BigInt, scale_exponent: i64) -> Result<Plaintext> {
    let t = params.lane(lane)?.t;
    Plaintext::new(params, lane, scale_exponent, integer_coeffs(z, t, params.n())?)
}

fn centered(c: u64, t: u64) -> i64 {
    if c > t / 2 {
        c as i64 - t as i64
    } else {
        c as i64
    }
}

/// Evaluates the centered polynomial at 2.
pub fn decode_integer(p: &Plaintext, t: u64) -> Result<i64> {
    let z = eval_at_two(p.coeffs().iter().map(|&c| BigInt::from(centered(c, t))));
    match z.to_i64() {
        Some(v) if z.bits() <= 62 => Ok(v),
        _ => Err(Error::Overflow(z.bits() as u32)),
    }
}

fn eval_at_two(coeffs: impl DoubleEndedIterator<Item = BigInt>) -> BigInt {
    coeffs.rev().fold(BigInt::zero(), |acc, c| (acc << 1u32) + c)
}

/// `round(v * 2^scale)` computed exactly, ties away from zero.
pub fn scaled_integer(v: f64, scale: i64) -> Result<BigInt> {
    if !v.is_finite() {
        return Err(Error::OutOfRange(format!("cannot encode {v}")));
    }
    if v == 0.0 {
        return Ok(BigInt::zero());
    }
    // v = mantissa * 2^exp with an integer mantissa
    let bits = v.abs().to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let (mantissa, exp) = if raw_exp == 0 {
        (bits & ((1 << 52) - 1), -1074)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), raw_exp - 1075)
    };
    let shift = exp + scale;
    let mag = if shift >= 0 {
        BigUint::from(mantissa) << shift as u64
    } else if -shift > 64 {
        BigUint::zero()
    } else {
        let s = (-shift) as u32;
        let m = mantissa as u128;
        // add half then truncate: rounds ties away from zero on the magnitude
        BigUint::from((m + (1u128 << (s - 1))) >> s)
    };
    let z = BigInt::from(mag);
    Ok(if v < 0.0 { -z } else { z })
}

/// Encodes `v` at an arbitrary power-of-two scale in every lane.
pub fn encode_at_scale(params: &EncryptionParams, v: f64, scale_exponent: i64) -> Result<EncodedValue> {
    let z = scaled_integer(v, scale_exponent)?;
    let polys = (0..params.lanes().len())
        .map(|lane| encode_big(params, lane, &z, scale_exponent))
        .collect::<Result<_>>()?;
    Ok(EncodedValue {
        polys,
        scale_exponent,
    })
}

pub fn encode_fixed(params: &EncryptionParams, v: f64, cfg: &FixedPointConfig) -> Result<EncodedValue> {
    check_lanes(params, cfg)?;
    let limit = 2f64.powi(62 - cfg.precision_bits as i32);
    if v.abs() >= limit {
        return Err(Error::OutOfRange(format!("{v} exceeds 2^{}", 62 - cfg.precision_bits)));
    }
    encode_at_scale(params, v, cfg.precision_bits as i64)
}

fn check_lanes(params: &EncryptionParams, cfg: &FixedPointConfig) -> Result<()> {
    if params.t_lanes() != cfg.t_lanes {
        return Err(Error::ParamMismatch("fixed-point lanes differ from encryption lanes".into()));
    }
    Ok(())
}

/// Coefficient-wise CRT across lanes, centered in `(-T/2, T/2]` with `T` the
/// product of the lane moduli.
#[derive(Clone, Debug)]
pub struct LaneCrt {
    product: BigUint,
    // (T / t_j) * ((T / t_j)^-1 mod t_j)
    weights: Vec<BigUint>,
}

impl LaneCrt {
    pub fn new(moduli: &[u64]) -> Result<Self> {
        let product = moduli.iter().fold(BigUint::one(), |acc, &t| acc * t);
        let weights = moduli
            .iter()
            .map(|&t| {
                let rest = &product / t;
                let inv = (&rest % t)
                    .modinv(&BigUint::from(t))
                    .ok_or_else(|| Error::InvalidParams(format!("plaintext modulus {t} shares a factor")))?;
                Ok(rest * inv)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            product,
            weights,
        })
    }

    pub fn product(&self) -> &BigUint {
        &self.product
    }

    pub fn combine(&self, residues: &[u64]) -> BigInt {
        let x = residues
            .iter()
            .zip(&self.weights)
            .fold(BigUint::zero(), |acc, (&r, w)| acc + w * r)
            % &self.product;
        if &x << 1u32 > self.product {
            BigInt::from(x) - BigInt::from(self.product.clone())
        } else {
            BigInt::from(x)
        }
    }
}

/// Recombines per-lane decryptions into the signed integer they encode.
pub fn decode_big(values: &[Plaintext], t_lanes: &[u64]) -> Result<BigInt> {
    if values.len() != t_lanes.len() {
        return Err(Error::InconsistentLanes(format!(
            "{} lanes decrypted, {} expected",
            values.len(),
            t_lanes.len()
        )));
    }
    for (j, (p, &t)) in values.iter().zip(t_lanes).enumerate() {
        if p.lane() != j {
            return Err(Error::InconsistentLanes(format!("lane {} in position {j}", p.lane())));
        }
        if p.scale_exponent() != values[0].scale_exponent() {
            return Err(Error::InconsistentLanes("lanes carry different scales".into()));
        }
        if p.coeffs().len() != values[0].coeffs().len() {
            return Err(Error::InconsistentLanes("lanes have different degrees".into()));
        }
        if p.coeffs().iter().any(|&c| c >= t) {
            return Err(Error::InconsistentLanes(format!("coefficient out of range for lane {j}")));
        }
    }
    if t_lanes.len() == 1 {
        let t = t_lanes[0];
        return Ok(eval_at_two(values[0].coeffs().iter().map(|&c| BigInt::from(centered(c, t)))));
    }
    let crt = LaneCrt::new(t_lanes)?;
    let n = values[0].coeffs().len();
    let mut residues = vec![0u64; values.len()];
    let coeffs = (0..n).map(|i| {
        for (r, p) in residues.iter_mut().zip(values) {
            *r = p.coeffs()[i];
        }
        crt.combine(&residues)
    });
    Ok(eval_at_two(coeffs.collect::<Vec<_>>().into_iter()))
}

/// `z / 2^scale` as the nearest double.
pub fn descale(z: &BigInt, scale_exponent: i64) -> f64 {
    if z.is_zero() {
        return 0.0;
    }
    // keep 64 significant bits before converting to avoid overflow
    let bits = z.bits() as i64;
    let drop = (bits - 64).max(0);
    let head = (z.abs() >> drop as u64).to_f64().expect("64-bit value");
    let v = head * 2f64.powi((drop - scale_exponent).clamp(-1074, 1023) as i32);
    if z.is_negative() {
        -v
    } else {
        v
    }
}

pub fn decode_fixed(values: &[Plaintext], scale_exponent: i64, cfg: &FixedPointConfig) -> Result<f64> {
    let z = decode_big(values, &cfg.t_lanes)?;
    Ok(descale(&z, scale_exponent))
}

/// Number of nonzero coefficients `v` would encode to at `scale`.
pub fn encoded_weight(v: f64, scale: i64) -> Result<u64> {
    Ok(scaled_integer(v, scale)?.magnitude().count_ones())
}

/// Whether `v` is zero or exactly `±2^e` with `e + scale >= 0`, so that its
/// encoding at `scale` is a single monomial (or nothing).
pub fn is_monomial_encodable(v: f64, scale: i64) -> bool {
    if v == 0.0 {
        return true;
    }
    let e = v.abs().log2();
    v.abs() == 2f64.powi(e.round() as i32) && e.round() as i64 + scale >= 0
}
