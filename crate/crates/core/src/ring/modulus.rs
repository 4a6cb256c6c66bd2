//! Word-sized modular arithmetic: Barrett reduction of 128-bit products,
//! Shoup multiplication for fixed operands, primality and root finding.

/// A word-sized modulus with precomputed Barrett constants.
///
/// Supports moduli up to 62 bits; all residues handled here are canonical
/// (strictly below `value`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Modulus {
    value: u64,
    // floor(2^128 / value), little-endian words.
    ratio: [u64; 2],
}

impl Modulus {
    pub const MAX_BITS: u32 = 62;

    pub fn new(value: u64) -> Option<Self> {
        if value < 2 || 64 - value.leading_zeros() > Self::MAX_BITS {
            return None;
        }
        // 2^128 / v computed as (2^128 - 1) / v, exact unless v divides 2^128,
        // which only powers of two do; those are corrected below.
        let mut r = u128::MAX / value as u128;
        if value.is_power_of_two() {
            r += 1;
        }
        Some(Self {
            value,
            ratio: [r as u64, (r >> 64) as u64],
        })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bits(&self) -> u32 {
        64 - self.value.leading_zeros()
    }

    /// Reduces an arbitrary 128-bit integer.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let lo = x as u64;
        let hi = (x >> 64) as u64;
        let [r0, r1] = self.ratio;

        // Upper 128 bits of the 256-bit product x * ratio; only the low word
        // of that is needed for the quotient estimate.
        let carry = ((lo as u128 * r0 as u128) >> 64) as u64;
        let t = lo as u128 * r1 as u128;
        let (mid, c0) = (t as u64).overflowing_add(carry);
        let top = (t >> 64) as u64 + c0 as u64;

        let t = hi as u128 * r0 as u128;
        let (_, c1) = mid.overflowing_add(t as u64);
        let carry = (t >> 64) as u64 + c1 as u64;

        let quotient = hi.wrapping_mul(r1).wrapping_add(top).wrapping_add(carry);
        let mut r = lo.wrapping_sub(quotient.wrapping_mul(self.value));
        while r >= self.value {
            r -= self.value;
        }
        r
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x < self.value {
            x
        } else {
            self.reduce_u128(x as u128)
        }
    }

    /// Reduces a signed value into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = self.reduce(x.unsigned_abs());
        if x < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        // residues stay below 2^62, so the wrapping forms never wrap
        let s = a.wrapping_add(b);
        if s >= self.value {
            s.wrapping_sub(self.value)
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a.wrapping_sub(b)
        } else {
            a.wrapping_add(self.value).wrapping_sub(b)
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// Precomputes `floor(w * 2^64 / q)` for repeated multiplication by `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    #[inline]
    pub fn mul_shoup(&self, x: u64, w: u64, w_shoup: u64) -> u64 {
        let q_est = ((x as u128 * w_shoup as u128) >> 64) as u64;
        let r = x.wrapping_mul(w).wrapping_sub(q_est.wrapping_mul(self.value));
        if r >= self.value {
            r.wrapping_sub(self.value)
        } else {
            r
        }
    }

    /// Shoup product left in `[0, 2q)`; any 64-bit `x` is accepted.
    #[inline]
    pub fn mul_shoup_lazy(&self, x: u64, w: u64, w_shoup: u64) -> u64 {
        let q_est = ((x as u128 * w_shoup as u128) >> 64) as u64;
        x.wrapping_mul(w).wrapping_sub(q_est.wrapping_mul(self.value))
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        base = self.reduce(base);
        let mut acc = 1 % self.value;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse modulo a prime modulus via Fermat.
    pub fn inv(&self, a: u64) -> Option<u64> {
        let a = self.reduce(a);
        if a == 0 {
            return None;
        }
        let r = self.pow(a, self.value - 2);
        (self.mul(r, a) == 1).then_some(r)
    }
}

/// Deterministic Miller-Rabin for all 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        r
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Finds a primitive `order`-th root of unity modulo a prime, where `order`
/// is a power of two dividing `q - 1`. Returns the smallest such root reached
/// by scanning generators 2, 3, ... for determinism.
pub fn primitive_root_of_unity(q: &Modulus, order: u64) -> Option<u64> {
    let qv = q.value();
    if !order.is_power_of_two() || order < 2 || !(qv - 1).is_multiple_of(order) {
        return None;
    }
    let cofactor = (qv - 1) / order;
    for g in 2..qv.min(1 << 20) {
        let r = q.pow(g, cofactor);
        if q.pow(r, order / 2) == qv - 1 {
            return Some(r);
        }
    }
    None
}

/// Returns `count` distinct primes below `2^bits` congruent to 1 modulo
/// `2n`, scanning downward and skipping anything in `exclude`.
pub fn ntt_primes_below(bits: u32, n: usize, count: usize, exclude: &[u64]) -> Vec<u64> {
    let step = 2 * n as u64;
    let mut candidate = ((1u64 << bits) - 1) / step * step + 1;
    if candidate >= 1u64 << bits {
        candidate -= step;
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count && candidate > step {
        if !exclude.contains(&candidate) && is_prime(candidate) {
            out.push(candidate);
        }
        candidate -= step;
    }
    out
}
