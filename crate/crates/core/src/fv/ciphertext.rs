//! Encryption, decryption and the homomorphic operations.

use num_bigint::BigUint;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::ring::{Domain, RingPoly};

use super::keys::{EvalKeys, PublicKey, SecretKey};
use super::params::EncryptionParams;
use super::plaintext::Plaintext;
use super::sample;

/// A two-component FV ciphertext in coefficient form.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    c0: RingPoly,
    c1: RingPoly,
    lane: usize,
    scale_exponent: i64,
    mul_depth: u32,
}

/// How a plaintext-ciphertext product is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MulStrategy {
    /// Shift-and-scale when the plaintext is a single term, NTT otherwise.
    Auto,
    /// Always through the NTT.
    Ntt,
}

impl Ciphertext {
    pub fn from_parts(
        params: &EncryptionParams,
        c0: RingPoly,
        c1: RingPoly,
        lane: usize,
        scale_exponent: i64,
        mul_depth: u32,
    ) -> Result<Self> {
        params.lane(lane)?;
        for c in [&c0, &c1] {
            if **c.context() != **params.ring() {
                return Err(Error::ParamMismatch("ciphertext is over a different ring".into()));
            }
        }
        Ok(Self {
            c0: c0.to_domain(Domain::Coefficient),
            c1: c1.to_domain(Domain::Coefficient),
            lane,
            scale_exponent,
            mul_depth,
        })
    }

    /// The noiseless encryption `(Δ m, 0)`; used for constants that no
    /// encrypted input touches.
    pub fn trivial(params: &EncryptionParams, m: &Plaintext) -> Result<Self> {
        let c0 = delta_times(params, m)?;
        let c1 = RingPoly::zero(params.ring(), Domain::Coefficient);
        Ok(Self {
            c0,
            c1,
            lane: m.lane(),
            scale_exponent: m.scale_exponent(),
            mul_depth: 0,
        })
    }

    pub fn c0(&self) -> &RingPoly {
        &self.c0
    }

    pub fn c1(&self) -> &RingPoly {
        &self.c1
    }

    pub fn lane(&self) -> usize {
        self.lane
    }

    pub fn scale_exponent(&self) -> i64 {
        self.scale_exponent
    }

    pub fn mul_depth(&self) -> u32 {
        self.mul_depth
    }
}

// Δ·m with m lifted centered: Δ t = q - (q mod t), so the rounding residue
// contributes (q mod t)·|m| to the noise and small signed values stay cheap.
fn delta_times(params: &EncryptionParams, m: &Plaintext) -> Result<RingPoly> {
    let lane = params.lane(m.lane())?;
    Ok(m.lift(params.ring(), lane.t).scalar_mul_rns(&lane.delta_rns))
}

pub fn encrypt<R: Rng + ?Sized>(pk: &PublicKey, m: &Plaintext, rng: &mut R) -> Result<Ciphertext> {
    let params = pk.params();
    let ctx = params.ring();
    let sigma = params.noise_stddev();
    let dm = delta_times(params, m)?;
    let u = sample::ternary(ctx, rng).to_domain(Domain::Ntt);
    let (p0, p1) = pk.ntt();

    let mut c0 = p0.clone();
    c0.mul_pointwise_assign(&u)?;
    let mut c0 = c0.to_domain(Domain::Coefficient);
    c0.add_assign(&sample::gaussian(ctx, sigma, rng))?;
    c0.add_assign(&dm)?;

    let mut c1 = p1.clone();
    c1.mul_pointwise_assign(&u)?;
    let mut c1 = c1.to_domain(Domain::Coefficient);
    c1.add_assign(&sample::gaussian(ctx, sigma, rng))?;

    Ok(Ciphertext {
        c0,
        c1,
        lane: m.lane(),
        scale_exponent: m.scale_exponent(),
        mul_depth: 0,
    })
}

// c0 + c1 s in coefficient form
fn phase(sk: &SecretKey, ct: &Ciphertext) -> Result<RingPoly> {
    let mut v = ct.c1.to_domain(Domain::Ntt);
    v.mul_pointwise_assign(sk.ntt())?;
    let mut v = v.to_domain(Domain::Coefficient);
    v.add_assign(&ct.c0)?;
    Ok(v)
}

fn coefficient(p: &RingPoly, j: usize, out: &mut [u64]) {
    for (o, limb) in out.iter_mut().zip(p.limbs()) {
        *o = limb[j];
    }
}

/// `m = round(t [c0 + c1 s]_q / q) mod t`, coefficient-wise.
pub fn decrypt(sk: &SecretKey, ct: &Ciphertext) -> Result<Plaintext> {
    let params = sk.params();
    let t = params.lane(ct.lane)?.t;
    let v = phase(sk, ct)?;
    let basis = params.basis();
    let q = params.q();
    let mut residues = vec![0u64; basis.len()];
    let coeffs = (0..params.n())
        .map(|j| {
            coefficient(&v, j, &mut residues);
            let x = basis.to_biguint(&residues);
            let m: BigUint = ((x * t + params.q_half()) / q) % t;
            m.to_u64().expect("reduced modulo t")
        })
        .collect();
    Plaintext::new(params, ct.lane, ct.scale_exponent, coeffs)
}

/// Budgets below this many bits count as exhausted. The invariant noise is
/// reduced modulo q, so a garbled ciphertext measures just above zero rather
/// than below it; one bit is the integer bit-length convention.
pub const NOISE_FLOOR_BITS: f64 = 1.0;

/// Decrypts, failing with [`Error::NoiseExhausted`] when the noise budget is
/// spent and the result would be meaningless.
pub fn decrypt_checked(sk: &SecretKey, ct: &Ciphertext) -> Result<Plaintext> {
    let budget = noise_budget(sk, ct)?;
    if budget < NOISE_FLOOR_BITS {
        return Err(Error::NoiseExhausted(budget));
    }
    decrypt(sk, ct)
}

pub(crate) fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        x.to_f64().expect("finite").log2()
    } else {
        let shift = bits - 64;
        (x >> shift).to_f64().expect("finite").log2() + shift as f64
    }
}

/// Remaining noise budget in bits: `log2(q / (2 |[t (c0 + c1 s)]_q|))`.
/// Decryption is correct exactly while this is positive.
pub fn noise_budget(sk: &SecretKey, ct: &Ciphertext) -> Result<f64> {
    let params = sk.params();
    let t = params.lane(ct.lane)?.t;
    let tv = phase(sk, ct)?.scalar_mul(t as i64);
    let basis = params.basis();
    let mut residues = vec![0u64; basis.len()];
    let mut worst = BigUint::zero();
    for j in 0..params.n() {
        coefficient(&tv, j, &mut residues);
        let x = basis.to_centered(&residues).abs().magnitude().clone();
        if x > worst {
            worst = x;
        }
    }
    let q_bits = log2_big(params.q());
    if worst.is_zero() {
        return Ok(q_bits - 1.0);
    }
    Ok(q_bits - 1.0 - log2_big(&worst))
}

fn check_pair(a: &Ciphertext, b: &Ciphertext) -> Result<()> {
    if a.lane != b.lane {
        return Err(Error::LaneMismatch {
            left: a.lane,
            right: b.lane,
        });
    }
    if **a.c0.context() != **b.c0.context() {
        return Err(Error::ParamMismatch("ciphertexts are over different rings".into()));
    }
    Ok(())
}

fn check_plain(ct: &Ciphertext, m: &Plaintext) -> Result<()> {
    if ct.lane != m.lane() {
        return Err(Error::LaneMismatch {
            left: ct.lane,
            right: m.lane(),
        });
    }
    Ok(())
}

pub fn add_ct(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    let mut out = a.clone();
    add_ct_assign(&mut out, b)?;
    Ok(out)
}

pub fn add_ct_assign(a: &mut Ciphertext, b: &Ciphertext) -> Result<()> {
    check_pair(a, b)?;
    if a.scale_exponent != b.scale_exponent {
        return Err(Error::ScaleMismatch {
            left: a.scale_exponent,
            right: b.scale_exponent,
        });
    }
    a.c0.add_assign(&b.c0)?;
    a.c1.add_assign(&b.c1)?;
    a.mul_depth = a.mul_depth.max(b.mul_depth);
    Ok(())
}

pub fn add_pt(params: &EncryptionParams, ct: &Ciphertext, m: &Plaintext) -> Result<Ciphertext> {
    check_plain(ct, m)?;
    if ct.scale_exponent != m.scale_exponent() {
        return Err(Error::ScaleMismatch {
            left: ct.scale_exponent,
            right: m.scale_exponent(),
        });
    }
    let mut out = ct.clone();
    out.c0.add_assign(&delta_times(params, m)?)?;
    Ok(out)
}

pub fn mul_pt(params: &EncryptionParams, ct: &Ciphertext, m: &Plaintext) -> Result<Ciphertext> {
    mul_pt_with(params, ct, m, MulStrategy::Auto)
}

/// Plaintext-ciphertext product. The plaintext is lifted with centered
/// coefficients so that `t - 1` acts as `-1`; the resulting scale is the sum
/// of both scales.
pub fn mul_pt_with(params: &EncryptionParams, ct: &Ciphertext, m: &Plaintext, strategy: MulStrategy) -> Result<Ciphertext> {
    check_plain(ct, m)?;
    let t = params.lane(m.lane())?.t;
    if m.is_zero() {
        return Err(Error::ZeroPlaintext);
    }
    let (c0, c1) = match (strategy, m.as_monomial(t)) {
        (MulStrategy::Auto, Some((k, c))) => (ct.c0.mul_monomial(k, c)?, ct.c1.mul_monomial(k, c)?),
        _ => {
            let p = m.lift(params.ring(), t).to_domain(Domain::Ntt);
            (ct.c0.mul_ntt(&p)?, ct.c1.mul_ntt(&p)?)
        }
    };
    Ok(Ciphertext {
        c0,
        c1,
        lane: ct.lane,
        scale_exponent: ct.scale_exponent + m.scale_exponent(),
        mul_depth: ct.mul_depth,
    })
}

// Centered extension of a q-basis polynomial to the tensoring basis.
fn lift_ext(params: &EncryptionParams, p: &RingPoly) -> RingPoly {
    let n = params.n();
    let k = params.basis().len();
    let aux = params.ext_basis().len() - k;
    let mut limbs: Vec<Vec<u64>> = p.limbs().to_vec();
    limbs.extend((0..aux).map(|_| vec![0u64; n]));
    let mut residues = vec![0u64; k];
    let mut scratch = vec![0u64; k];
    let mut out = vec![0u64; aux];
    for j in 0..n {
        coefficient(p, j, &mut residues);
        params.extender().extend_centered(&residues, &mut scratch, &mut out);
        for (limb, &r) in limbs[k..].iter_mut().zip(&out) {
            limb[j] = r;
        }
    }
    let mut lifted = RingPoly::from_limbs(params.ext_ring(), limbs, Domain::Coefficient).expect("residues in range");
    lifted.forward_in_place();
    lifted
}

// Bits [lo, lo + width) of a little-endian word slice.
fn bit_field(words: &[u64], lo: usize, width: u32) -> u64 {
    let (w, off) = (lo / 64, (lo % 64) as u32);
    let mut v = words.get(w).copied().unwrap_or(0) >> off;
    if off + width > 64 {
        v |= words.get(w + 1).copied().unwrap_or(0) << (64 - off);
    }
    if width < 64 {
        v &= (1u64 << width) - 1;
    }
    v
}

/// Ciphertext product with relinearization. The tensor is computed exactly
/// over a basis wide enough for `n q^2`, scaled by `t / q` with rounding, and
/// the quadratic term is folded back with the evaluation keys.
/// `round(t Y / q)` for a tensored polynomial on the extended limbs,
/// returned as q-limb residues in coefficient order.
pub(crate) fn rescale(params: &EncryptionParams, t: u64, d: RingPoly) -> Vec<Vec<u64>> {
    let d = d.to_domain(Domain::Coefficient);
    let limbs = d.limbs();
    let q_mods = params.basis().moduli();
    let k = q_mods.len();
    let aux = params.aux_moduli();
    let q_inv = params.q_inv_aux();
    let (up, down) = (params.extender(), params.aux_to_q());
    let mut r = vec![0u64; k];
    let mut r_aux = vec![0u64; aux.len()];
    let mut z_aux = vec![0u64; aux.len()];
    let mut z = vec![0u64; k];
    let mut scratch = vec![0u64; k.max(aux.len())];
    let mut out = vec![vec![0u64; params.n()]; k];
    // (t Y - [t Y]_q) / q is exact and rounds to nearest since q is odd
    for j in 0..params.n() {
        for (i, m) in q_mods.iter().enumerate() {
            r[i] = m.mul(m.reduce(t), limbs[i][j]);
        }
        up.extend_centered(&r, &mut scratch[..k], &mut r_aux);
        for (a, p) in aux.iter().enumerate() {
            let ty = p.mul(p.reduce(t), limbs[k + a][j]);
            z_aux[a] = p.mul(p.sub(ty, r_aux[a]), q_inv[a]);
        }
        down.extend_centered(&z_aux, &mut scratch[..aux.len()], &mut z);
        for (limb, &v) in out.iter_mut().zip(&z) {
            limb[j] = v;
        }
    }
    out
}

pub fn mul_ct(ek: &EvalKeys, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_pair(a, b)?;
    let params = ek.params();
    if **a.c0.context() != **params.ring() {
        return Err(Error::ParamMismatch("evaluation keys are for a different ring".into()));
    }
    let t = params.lane(a.lane)?.t;
    let n = params.n();
    let ctx = params.ring();

    let (a0, a1) = (lift_ext(params, &a.c0), lift_ext(params, &a.c1));
    let (b0, b1) = (lift_ext(params, &b.c0), lift_ext(params, &b.c1));
    let mut d0 = a0.clone();
    d0.mul_pointwise_assign(&b0)?;
    let mut d1 = a0;
    d1.mul_pointwise_assign(&b1)?;
    d1.mul_acc_pointwise(&a1, &b0)?;
    let mut d2 = a1;
    d2.mul_pointwise_assign(&b1)?;

    let basis = params.basis();
    let c0 = RingPoly::from_limbs(ctx, rescale(params, t, d0), Domain::Coefficient)?;
    let c1 = RingPoly::from_limbs(ctx, rescale(params, t, d1), Domain::Coefficient)?;
    let c2 = rescale(params, t, d2);

    // base-beta digits of c2, one polynomial per digit position
    let width = params.beta_bits();
    let digits = params.ell() + 1;
    let mut parts: Vec<Vec<Vec<u64>>> = vec![vec![vec![0u64; n]; basis.len()]; digits];
    let mut r = vec![0u64; basis.len()];
    for j in 0..n {
        for (x, limb) in r.iter_mut().zip(&c2) {
            *x = limb[j];
        }
        let words = basis.to_biguint(&r).to_u64_digits();
        for (i, part) in parts.iter_mut().enumerate() {
            let v = bit_field(&words, i * width as usize, width);
            for (limb, m) in part.iter_mut().zip(basis.moduli()) {
                limb[j] = m.reduce(v);
            }
        }
    }

    let mut acc0 = RingPoly::zero(ctx, Domain::Ntt);
    let mut acc1 = RingPoly::zero(ctx, Domain::Ntt);
    for (part, (ka, kg)) in parts.into_iter().zip(ek.ntt()) {
        let mut p = RingPoly::from_limbs(ctx, part, Domain::Coefficient)?;
        p.forward_in_place();
        acc0.mul_acc_pointwise(kg, &p)?;
        acc1.mul_acc_pointwise(ka, &p)?;
    }
    let mut c0 = c0;
    c0.add_assign(&acc0.to_domain(Domain::Coefficient))?;
    let mut c1 = c1;
    c1.add_assign(&acc1.to_domain(Domain::Coefficient))?;

    Ok(Ciphertext {
        c0,
        c1,
        lane: a.lane,
        scale_exponent: a.scale_exponent + b.scale_exponent,
        mul_depth: a.mul_depth.max(b.mul_depth) + 1,
    })
}
