use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ring::RingContext;
use crate::ring::RingPoly;

use super::params::EncryptionParams;

/// A plaintext polynomial in `R_t` for one lane, tagged with the power-of-two
/// exponent of its fixed-point scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plaintext {
    lane: usize,
    scale_exponent: i64,
    coeffs: Vec<u64>,
}

impl Plaintext {
    /// Coefficients must lie in `[0, t)`; missing high coefficients are zero.
    pub fn new(params: &EncryptionParams, lane: usize, scale_exponent: i64, mut coeffs: Vec<u64>) -> Result<Self> {
        let t = params.lane(lane)?.t;
        if coeffs.len() > params.n() {
            return Err(Error::Shape(format!(
                "{} plaintext coefficients exceed ring degree {}",
                coeffs.len(),
                params.n()
            )));
        }
        if let Some(&c) = coeffs.iter().find(|&&c| c >= t) {
            return Err(Error::OutOfRange(format!("plaintext coefficient {c} not below {t}")));
        }
        coeffs.resize(params.n(), 0);
        Ok(Self {
            lane,
            scale_exponent,
            coeffs,
        })
    }

    /// Reduces signed coefficients modulo the lane's plaintext modulus.
    pub fn from_signed(params: &EncryptionParams, lane: usize, scale_exponent: i64, coeffs: &[i64]) -> Result<Self> {
        let t = params.lane(lane)?.t as i128;
        let reduced = coeffs.iter().map(|&c| (c as i128).rem_euclid(t) as u64).collect();
        Self::new(params, lane, scale_exponent, reduced)
    }

    pub fn lane(&self) -> usize {
        self.lane
    }

    pub fn scale_exponent(&self) -> i64 {
        self.scale_exponent
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// Centered coefficients in `(-t/2, t/2]`.
    pub fn centered(&self, t: u64) -> Vec<i64> {
        self.coeffs
            .iter()
            .map(|&c| if c > t / 2 { c as i64 - t as i64 } else { c as i64 })
            .collect()
    }

    /// `Some((k, c))` when the polynomial is the single term `c x^k`, with `c`
    /// centered.
    pub fn as_monomial(&self, t: u64) -> Option<(usize, i64)> {
        let mut nonzero = self.coeffs.iter().enumerate().filter(|(_, &c)| c != 0);
        let (k, &c) = nonzero.next()?;
        if nonzero.next().is_some() {
            return None;
        }
        let c = if c > t / 2 { c as i64 - t as i64 } else { c as i64 };
        Some((k, c))
    }

    /// The centered lift into `R_q`.
    pub(crate) fn lift(&self, ctx: &Arc<RingContext>, t: u64) -> RingPoly {
        RingPoly::from_signed(ctx, &self.centered(t)).expect("length matches ring degree")
    }
}
