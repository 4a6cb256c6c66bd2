//! Exact conversions between RNS residues and integers.
//!
//! Reconstruction goes through Garner's mixed-radix digits, which keeps the
//! centering test and base extension in word arithmetic; multiprecision
//! integers are only materialized when a caller needs the value itself.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::Zero;

use super::modulus::Modulus;

#[derive(Clone, Debug)]
pub struct RnsBasis {
    moduli: Vec<Modulus>,
    // inv[i][j] = q_j^{-1} mod q_i for j < i
    inv: Vec<Vec<u64>>,
    half_digits: Vec<u64>,
    product: BigUint,
}

impl RnsBasis {
    pub fn new(moduli: &[u64]) -> Self {
        let moduli: Vec<Modulus> = moduli
            .iter()
            .map(|&q| Modulus::new(q).expect("valid modulus"))
            .collect();
        let inv = moduli
            .iter()
            .enumerate()
            .map(|(i, qi)| {
                moduli[..i]
                    .iter()
                    .map(|qj| qi.inv(qj.value()).expect("pairwise coprime moduli"))
                    .collect()
            })
            .collect();
        let product = moduli
            .iter()
            .fold(BigUint::from(1u8), |acc, q| acc * q.value());
        let mut basis = Self {
            moduli,
            inv,
            half_digits: Vec::new(),
            product,
        };
        let half: BigUint = (&basis.product - 1u8) >> 1;
        let residues = basis.residues_of(&half);
        let mut digits = vec![0; basis.len()];
        basis.mixed_radix(&residues, &mut digits);
        basis.half_digits = digits;
        basis
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn product(&self) -> &BigUint {
        &self.product
    }

    /// Garner digits `v` with `x = v_0 + v_1 q_0 + v_2 q_0 q_1 + ...`.
    pub fn mixed_radix(&self, residues: &[u64], digits: &mut [u64]) {
        for i in 0..self.moduli.len() {
            let qi = &self.moduli[i];
            let mut v = residues[i];
            for (j, &d) in digits[..i].iter().enumerate() {
                v = qi.mul(qi.sub(v, qi.reduce(d)), self.inv[i][j]);
            }
            digits[i] = v;
        }
    }

    /// Whether the mixed-radix value exceeds `(Q - 1) / 2`.
    pub fn digits_above_half(&self, digits: &[u64]) -> bool {
        for (d, h) in digits.iter().zip(&self.half_digits).rev() {
            if d != h {
                return d > h;
            }
        }
        false
    }

    pub fn digits_to_biguint(&self, digits: &[u64]) -> BigUint {
        let mut acc = BigUint::zero();
        for (d, q) in digits.iter().zip(&self.moduli).rev() {
            acc = acc * q.value() + *d;
        }
        acc
    }

    /// The integer in `[0, Q)` with the given residues.
    pub fn to_biguint(&self, residues: &[u64]) -> BigUint {
        let mut digits = vec![0; self.len()];
        self.mixed_radix(residues, &mut digits);
        self.digits_to_biguint(&digits)
    }

    /// The representative in `(-Q/2, Q/2]` with the given residues.
    pub fn to_centered(&self, residues: &[u64]) -> BigInt {
        let mut digits = vec![0; self.len()];
        self.mixed_radix(residues, &mut digits);
        let x = BigInt::from(self.digits_to_biguint(&digits));
        if self.digits_above_half(&digits) {
            x - BigInt::from(self.product.clone())
        } else {
            x
        }
    }

    pub fn residues_of(&self, x: &BigUint) -> Vec<u64> {
        self.moduli
            .iter()
            .map(|q| {
                let r = x % q.value();
                r.iter_u64_digits().next().unwrap_or(0)
            })
            .collect()
    }

    pub fn residues_of_signed(&self, x: &BigInt) -> Vec<u64> {
        let mag = self.residues_of(x.magnitude());
        if x.sign() == Sign::Minus {
            mag.iter().zip(&self.moduli).map(|(&r, q)| q.neg(r)).collect()
        } else {
            mag
        }
    }
}

/// Exact extension of centered values from one basis to additional moduli.
#[derive(Clone, Debug)]
pub struct BaseExtender {
    from: RnsBasis,
    to: Vec<Modulus>,
    // prefix[t][i] = (q_0 * ... * q_{i-1}) mod p_t
    prefix: Vec<Vec<u64>>,
    // Q mod p_t
    full: Vec<u64>,
}

impl BaseExtender {
    pub fn new(from: RnsBasis, to: &[u64]) -> Self {
        let to: Vec<Modulus> = to
            .iter()
            .map(|&p| Modulus::new(p).expect("valid modulus"))
            .collect();
        let prefix: Vec<Vec<u64>> = to
            .iter()
            .map(|p| {
                let mut acc = 1u64;
                from.moduli
                    .iter()
                    .map(|q| {
                        let cur = acc;
                        acc = p.mul(acc, p.reduce(q.value()));
                        cur
                    })
                    .collect()
            })
            .collect();
        let full = to
            .iter()
            .map(|p| {
                from.moduli
                    .iter()
                    .fold(1u64, |acc, q| p.mul(acc, p.reduce(q.value())))
            })
            .collect();
        Self {
            from,
            to,
            prefix,
            full,
        }
    }

    pub fn source(&self) -> &RnsBasis {
        &self.from
    }

    /// Writes the residues of the centered lift of `residues` modulo each
    /// target modulus. `scratch` must hold `source().len()` words.
    pub fn extend_centered(&self, residues: &[u64], scratch: &mut [u64], out: &mut [u64]) {
        self.from.mixed_radix(residues, scratch);
        let negative = self.from.digits_above_half(scratch);
        for (t, p) in self.to.iter().enumerate() {
            let mut acc = 0u64;
            for (&d, &w) in scratch.iter().zip(&self.prefix[t]) {
                acc = p.add(acc, p.mul(p.reduce(d), w));
            }
            if negative {
                acc = p.sub(acc, self.full[t]);
            }
            out[t] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const QS: [u64; 3] = [30296486258802689, 30296486253035521, 12289];

    proptest! {
        #[test]
        fn round_trip_unsigned(a: u64, b: u64, c: u64) {
            let basis = RnsBasis::new(&QS);
            let x = (BigUint::from(a) * b * c) % basis.product();
            let r = basis.residues_of(&x);
            prop_assert_eq!(basis.to_biguint(&r), x);
        }

        #[test]
        fn centered_lift_and_extension(a: i64, b: u32) {
            let basis = RnsBasis::new(&QS);
            let x = BigInt::from(a) * BigInt::from(b);
            let r = basis.residues_of_signed(&x);
            prop_assert_eq!(basis.to_centered(&r), x.clone());

            let targets = [40961u64, 65537, 114689];
            let ext = BaseExtender::new(basis.clone(), &targets);
            let mut scratch = vec![0; 3];
            let mut out = vec![0; 3];
            ext.extend_centered(&r, &mut scratch, &mut out);
            let expect = RnsBasis::new(&targets).residues_of_signed(&x);
            prop_assert_eq!(out, expect);
        }
    }

    #[test]
    fn centering_boundary() {
        let basis = RnsBasis::new(&[17, 97]);
        // Q = 1649, (Q - 1) / 2 = 824
        let half = basis.residues_of(&BigUint::from(824u32));
        assert_eq!(basis.to_centered(&half), BigInt::from(824));
        let above = basis.residues_of(&BigUint::from(825u32));
        assert_eq!(basis.to_centered(&above), BigInt::from(-824));
    }
}
