//! Negacyclic NTT over a single prime limb.
//!
//! Forward transform is Cooley-Tukey with powers of the 2n-th root psi stored
//! in bit-reversed order, so no separate twist or permutation pass is needed;
//! the inverse is Gentleman-Sande followed by scaling with n^-1. Outputs are in
//! bit-reversed evaluation order, which is fine for pointwise products.

use super::modulus::{is_prime, primitive_root_of_unity, Modulus};
use crate::error::{Error, Result};

/// One RNS limb: a prime `q ≡ 1 (mod 2n)` with its twiddle tables.
#[derive(Clone, Debug)]
pub struct ModulusLimb {
    modulus: Modulus,
    n: usize,
    root: u64,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

impl PartialEq for ModulusLimb {
    fn eq(&self, other: &Self) -> bool {
        self.modulus == other.modulus && self.n == other.n && self.root == other.root
    }
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

impl ModulusLimb {
    pub fn new(q: u64, n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParams(format!("ring degree {n} is not a power of two")));
        }
        let modulus = Modulus::new(q)
            .ok_or_else(|| Error::InvalidParams(format!("modulus {q} out of range")))?;
        if !is_prime(q) {
            return Err(Error::InvalidParams(format!("modulus {q} is not prime")));
        }
        if !(q - 1).is_multiple_of(2 * n as u64) {
            return Err(Error::InvalidParams(format!("modulus {q} is not 1 mod 2n (n = {n})")));
        }
        let root = primitive_root_of_unity(&modulus, 2 * n as u64).ok_or_else(|| {
            Error::InvalidParams(format!("no primitive 2n-th root of unity modulo {q}"))
        })?;
        let root_inv = modulus.inv(root).expect("root is a unit");

        let bits = n.trailing_zeros();
        let mut psi_rev = vec![0u64; n];
        let mut psi_inv_rev = vec![0u64; n];
        let (mut p, mut pi) = (1u64, 1u64);
        for i in 0..n {
            let j = bit_reverse(i, bits);
            psi_rev[j] = p;
            psi_inv_rev[j] = pi;
            p = modulus.mul(p, root);
            pi = modulus.mul(pi, root_inv);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv(n as u64).expect("n is a unit");

        Ok(Self {
            modulus,
            n,
            root,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
        })
    }

    #[inline]
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.modulus.value()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The primitive 2n-th root of unity used by the transform.
    pub fn root(&self) -> u64 {
        self.root
    }

    // Butterflies run lazily (Harvey): forward values live in [0, 4q) and
    // inverse values in [0, 2q), which needs 4q < 2^64.
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for (i, block) in a.chunks_exact_mut(2 * t).enumerate() {
                let w = self.psi_rev[m + i];
                let ws = self.psi_rev_shoup[m + i];
                let (lo, hi) = block.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let mut u = *x;
                    if u >= two_q {
                        u -= two_q;
                    }
                    let v = self.modulus.mul_shoup_lazy(*y, w, ws);
                    *x = u + v;
                    *y = u + two_q - v;
                }
            }
            m <<= 1;
        }
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= two_q {
                v -= two_q;
            }
            if v >= q {
                v -= q;
            }
            *x = v;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = &self.modulus;
        let two_q = 2 * q.value();
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            for (i, block) in a.chunks_exact_mut(2 * t).enumerate() {
                let w = self.psi_inv_rev[h + i];
                let ws = self.psi_inv_rev_shoup[h + i];
                let (lo, hi) = block.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (u, v) = (*x, *y);
                    let mut s = u + v;
                    if s >= two_q {
                        s -= two_q;
                    }
                    *x = s;
                    *y = q.mul_shoup_lazy(u + two_q - v, w, ws);
                }
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = q.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}
