use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::ring::{Domain, RingPoly};

use super::params::EncryptionParams;
use super::sample;

/// Ternary secret `s`, kept in both domains.
#[derive(Clone, Debug)]
pub struct SecretKey {
    params: Arc<EncryptionParams>,
    s: RingPoly,
    s_ntt: RingPoly,
}

impl SecretKey {
    pub fn from_poly(params: &Arc<EncryptionParams>, s: RingPoly) -> Result<Self> {
        check_ring(params, &s)?;
        let s = s.to_domain(Domain::Coefficient);
        let s_ntt = s.to_domain(Domain::Ntt);
        Ok(Self {
            params: params.clone(),
            s,
            s_ntt,
        })
    }

    pub fn params(&self) -> &Arc<EncryptionParams> {
        &self.params
    }

    pub fn poly(&self) -> &RingPoly {
        &self.s
    }

    pub(crate) fn ntt(&self) -> &RingPoly {
        &self.s_ntt
    }
}

/// `(p0, p1) = (-(a s + e), a)` in coefficient form.
#[derive(Clone, Debug)]
pub struct PublicKey {
    params: Arc<EncryptionParams>,
    p0: RingPoly,
    p1: RingPoly,
    ntt: OnceLock<(RingPoly, RingPoly)>,
}

impl PublicKey {
    pub fn from_polys(params: &Arc<EncryptionParams>, p0: RingPoly, p1: RingPoly) -> Result<Self> {
        check_ring(params, &p0)?;
        check_ring(params, &p1)?;
        Ok(Self {
            params: params.clone(),
            p0: p0.to_domain(Domain::Coefficient),
            p1: p1.to_domain(Domain::Coefficient),
            ntt: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &Arc<EncryptionParams> {
        &self.params
    }

    pub fn polys(&self) -> (&RingPoly, &RingPoly) {
        (&self.p0, &self.p1)
    }

    pub(crate) fn ntt(&self) -> &(RingPoly, RingPoly) {
        self.ntt
            .get_or_init(|| (self.p0.to_domain(Domain::Ntt), self.p1.to_domain(Domain::Ntt)))
    }
}

/// Relinearization keys: for each digit position `i`, the pair
/// `(a_i, g_i)` with `g_i = -(a_i s + e_i) + beta^i s^2`.
#[derive(Clone, Debug)]
pub struct EvalKeys {
    params: Arc<EncryptionParams>,
    pairs: Vec<(RingPoly, RingPoly)>,
    ntt: OnceLock<Vec<(RingPoly, RingPoly)>>,
}

impl EvalKeys {
    pub fn from_pairs(params: &Arc<EncryptionParams>, pairs: Vec<(RingPoly, RingPoly)>) -> Result<Self> {
        if pairs.len() != params.ell() + 1 {
            return Err(Error::ParamMismatch(format!(
                "expected {} relinearization pairs, got {}",
                params.ell() + 1,
                pairs.len()
            )));
        }
        for (a, g) in &pairs {
            check_ring(params, a)?;
            check_ring(params, g)?;
        }
        let pairs = pairs
            .into_iter()
            .map(|(a, g)| (a.to_domain(Domain::Coefficient), g.to_domain(Domain::Coefficient)))
            .collect();
        Ok(Self {
            params: params.clone(),
            pairs,
            ntt: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &Arc<EncryptionParams> {
        &self.params
    }

    pub fn pairs(&self) -> &[(RingPoly, RingPoly)] {
        &self.pairs
    }

    pub(crate) fn ntt(&self) -> &[(RingPoly, RingPoly)] {
        self.ntt.get_or_init(|| {
            self.pairs
                .iter()
                .map(|(a, g)| (a.to_domain(Domain::Ntt), g.to_domain(Domain::Ntt)))
                .collect()
        })
    }
}

fn check_ring(params: &EncryptionParams, p: &RingPoly) -> Result<()> {
    if **p.context() != **params.ring() {
        return Err(Error::ParamMismatch("key polynomial is over a different ring".into()));
    }
    Ok(())
}

/// Deterministic key generation from a 64-bit seed.
pub fn keygen(params: &Arc<EncryptionParams>, seed: u64) -> (SecretKey, PublicKey, EvalKeys) {
    keygen_with_rng(params, &mut ChaCha20Rng::seed_from_u64(seed))
}

pub fn keygen_with_rng<R: Rng + ?Sized>(params: &Arc<EncryptionParams>, rng: &mut R) -> (SecretKey, PublicKey, EvalKeys) {
    let ctx = params.ring();
    let sigma = params.noise_stddev();
    let s = sample::ternary(ctx, rng);
    let sk = SecretKey::from_poly(params, s).expect("same ring");
    let s_ntt = sk.ntt();

    // returns -(a s + e) for a uniform a, both in coefficient form
    let mask = |rng: &mut R| {
        let a = sample::uniform(ctx, rng);
        let mut b = a.clone();
        b.mul_pointwise_assign(s_ntt).expect("same ring");
        let mut b = b.to_domain(Domain::Coefficient);
        b.add_assign(&sample::gaussian(ctx, sigma, rng)).expect("same ring");
        (a.to_domain(Domain::Coefficient), b.neg())
    };

    let (a, b) = mask(rng);
    let pk = PublicKey::from_polys(params, b, a).expect("same ring");

    let mut s2 = s_ntt.clone();
    s2.mul_pointwise_assign(s_ntt).expect("same ring");
    let s2 = s2.to_domain(Domain::Coefficient);
    let beta = params.beta();
    let mut power: Vec<u64> = vec![1; ctx.limbs().len()];
    let mut pairs = Vec::with_capacity(params.ell() + 1);
    for _ in 0..=params.ell() {
        let (a, mut g) = mask(rng);
        g.add_assign(&s2.scalar_mul_rns(&power)).expect("same ring");
        pairs.push((a, g));
        for (p, limb) in power.iter_mut().zip(ctx.limbs()) {
            let q = limb.modulus();
            *p = q.mul(*p, q.reduce(beta));
        }
    }
    let ek = EvalKeys::from_pairs(params, pairs).expect("pair count matches");
    (sk, pk, ek)
}
