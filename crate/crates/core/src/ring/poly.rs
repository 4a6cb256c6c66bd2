use std::sync::Arc;

use super::ntt::ModulusLimb;
use crate::error::{Error, Result};

/// A ring degree together with its RNS limbs: the ring `Z_q[x]/(x^n + 1)` with
/// `q = q_1 * ... * q_k`. Shared read-only between all polynomials over it.
#[derive(Debug, PartialEq)]
pub struct RingContext {
    n: usize,
    limbs: Vec<ModulusLimb>,
}

impl RingContext {
    pub fn new(n: usize, moduli: &[u64]) -> Result<Arc<Self>> {
        if moduli.is_empty() {
            return Err(Error::InvalidParams("at least one modulus limb required".into()));
        }
        for (i, q) in moduli.iter().enumerate() {
            if moduli[..i].contains(q) {
                return Err(Error::InvalidParams(format!("duplicate modulus limb {q}")));
            }
        }
        let limbs = moduli
            .iter()
            .map(|&q| ModulusLimb::new(q, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(Self { n, limbs }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn limbs(&self) -> &[ModulusLimb] {
        &self.limbs
    }

    pub fn moduli(&self) -> Vec<u64> {
        self.limbs.iter().map(|l| l.q()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Coefficient,
    Ntt,
}

/// An element of `R_q` in RNS form: one residue vector per limb.
#[derive(Clone, Debug)]
pub struct RingPoly {
    ctx: Arc<RingContext>,
    limbs: Vec<Vec<u64>>,
    domain: Domain,
}

impl PartialEq for RingPoly {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.limbs == other.limbs && same_ring(&self.ctx, &other.ctx)
    }
}

fn same_ring(a: &Arc<RingContext>, b: &Arc<RingContext>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl RingPoly {
    pub fn zero(ctx: &Arc<RingContext>, domain: Domain) -> Self {
        Self {
            limbs: vec![vec![0; ctx.n]; ctx.limbs.len()],
            ctx: ctx.clone(),
            domain,
        }
    }

    /// Builds a polynomial from residue vectors, checking shape and range.
    pub fn from_limbs(ctx: &Arc<RingContext>, limbs: Vec<Vec<u64>>, domain: Domain) -> Result<Self> {
        if limbs.len() != ctx.limbs.len() {
            return Err(Error::ParamMismatch(format!(
                "expected {} limbs, got {}",
                ctx.limbs.len(),
                limbs.len()
            )));
        }
        for (coeffs, limb) in limbs.iter().zip(&ctx.limbs) {
            if coeffs.len() != ctx.n {
                return Err(Error::ParamMismatch(format!(
                    "expected {} coefficients, got {}",
                    ctx.n,
                    coeffs.len()
                )));
            }
            if let Some(&c) = coeffs.iter().find(|&&c| c >= limb.q()) {
                return Err(Error::OutOfRange(format!("residue {c} not below {}", limb.q())));
            }
        }
        Ok(Self {
            ctx: ctx.clone(),
            limbs,
            domain,
        })
    }

    /// Reduces signed integer coefficients into every limb.
    pub fn from_signed(ctx: &Arc<RingContext>, coeffs: &[i64]) -> Result<Self> {
        if coeffs.len() > ctx.n {
            return Err(Error::ParamMismatch(format!(
                "{} coefficients exceed ring degree {}",
                coeffs.len(),
                ctx.n
            )));
        }
        let limbs = ctx
            .limbs
            .iter()
            .map(|limb| {
                let q = limb.modulus();
                let mut v = vec![0u64; ctx.n];
                for (dst, &c) in v.iter_mut().zip(coeffs) {
                    *dst = q.reduce_i64(c);
                }
                v
            })
            .collect();
        Ok(Self {
            ctx: ctx.clone(),
            limbs,
            domain: Domain::Coefficient,
        })
    }

    /// The monomial `coeff * x^k`.
    pub fn monomial(ctx: &Arc<RingContext>, k: usize, coeff: i64) -> Result<Self> {
        if k >= ctx.n {
            return Err(Error::OutOfRange(format!("exponent {k} not below ring degree {}", ctx.n)));
        }
        let mut p = Self::zero(ctx, Domain::Coefficient);
        for (v, limb) in p.limbs.iter_mut().zip(&ctx.limbs) {
            v[k] = limb.modulus().reduce_i64(coeff);
        }
        Ok(p)
    }

    pub fn context(&self) -> &Arc<RingContext> {
        &self.ctx
    }

    pub fn n(&self) -> usize {
        self.ctx.n
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn limbs(&self) -> &[Vec<u64>] {
        &self.limbs
    }

    pub fn into_limbs(self) -> Vec<Vec<u64>> {
        self.limbs
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|l| l.iter().all(|&c| c == 0))
    }

    fn check_ring(&self, other: &Self) -> Result<()> {
        if same_ring(&self.ctx, &other.ctx) {
            Ok(())
        } else {
            Err(Error::ParamMismatch("operands live in different rings".into()))
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        self.check_ring(other)?;
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    fn require(&self, domain: Domain) -> Result<()> {
        if self.domain == domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn ntt_forward(&self) -> Result<Self> {
        self.require(Domain::Coefficient)?;
        let mut out = self.clone();
        out.forward_in_place();
        Ok(out)
    }

    pub fn ntt_inverse(&self) -> Result<Self> {
        self.require(Domain::Ntt)?;
        let mut out = self.clone();
        out.inverse_in_place();
        Ok(out)
    }

    pub(crate) fn forward_in_place(&mut self) {
        debug_assert_eq!(self.domain, Domain::Coefficient);
        for (v, limb) in self.limbs.iter_mut().zip(&self.ctx.limbs) {
            limb.forward(v);
        }
        self.domain = Domain::Ntt;
    }

    pub(crate) fn inverse_in_place(&mut self) {
        debug_assert_eq!(self.domain, Domain::Ntt);
        for (v, limb) in self.limbs.iter_mut().zip(&self.ctx.limbs) {
            limb.inverse(v);
        }
        self.domain = Domain::Coefficient;
    }

    /// Converts to the requested domain, transforming only if needed.
    pub fn to_domain(&self, domain: Domain) -> Self {
        let mut out = self.clone();
        match (self.domain, domain) {
            (Domain::Coefficient, Domain::Ntt) => out.forward_in_place(),
            (Domain::Ntt, Domain::Coefficient) => out.inverse_in_place(),
            _ => {}
        }
        out
    }

    /// Negacyclic product via the NTT. Operands may be in either domain; the
    /// result is in the Coefficient domain.
    pub fn mul_ntt(&self, other: &Self) -> Result<Self> {
        self.check_ring(other)?;
        let mut a = self.to_domain(Domain::Ntt);
        let b = other.to_domain(Domain::Ntt);
        a.mul_pointwise_assign(&b)?;
        a.inverse_in_place();
        Ok(a)
    }

    /// Pointwise product of two NTT-domain polynomials.
    pub fn mul_pointwise_assign(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        self.require(Domain::Ntt)?;
        for ((a, b), limb) in self.limbs.iter_mut().zip(&other.limbs).zip(&self.ctx.limbs) {
            let q = limb.modulus();
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.mul(*x, y);
            }
        }
        Ok(())
    }

    /// `self += a * b` for NTT-domain operands.
    pub fn mul_acc_pointwise(&mut self, a: &Self, b: &Self) -> Result<()> {
        self.check_compatible(a)?;
        a.check_compatible(b)?;
        self.require(Domain::Ntt)?;
        for (((acc, x), y), limb) in self
            .limbs
            .iter_mut()
            .zip(&a.limbs)
            .zip(&b.limbs)
            .zip(&self.ctx.limbs)
        {
            let q = limb.modulus();
            for ((d, &u), &v) in acc.iter_mut().zip(x).zip(y) {
                *d = q.add(*d, q.mul(u, v));
            }
        }
        Ok(())
    }

    /// Schoolbook negacyclic product, O(n^2) per limb.
    pub fn mul_naive(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        self.require(Domain::Coefficient)?;
        let n = self.ctx.n;
        let mut out = Self::zero(&self.ctx, Domain::Coefficient);
        for (((dst, a), b), limb) in out
            .limbs
            .iter_mut()
            .zip(&self.limbs)
            .zip(&other.limbs)
            .zip(&self.ctx.limbs)
        {
            let q = limb.modulus();
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0 {
                    continue;
                }
                for (j, &bj) in b.iter().enumerate() {
                    let p = q.mul(ai, bj);
                    let k = i + j;
                    if k < n {
                        dst[k] = q.add(dst[k], p);
                    } else {
                        dst[k - n] = q.sub(dst[k - n], p);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Multiplies by the monomial `coeff * x^k` in O(n) per limb: each input
    /// coefficient is multiplied once and lands at index `i + k`, negated when
    /// it wraps past `x^n = -1`.
    pub fn mul_monomial(&self, k: usize, coeff: i64) -> Result<Self> {
        self.require(Domain::Coefficient)?;
        let n = self.ctx.n;
        if k >= n {
            return Err(Error::OutOfRange(format!("exponent {k} not below ring degree {n}")));
        }
        let mut out = Self::zero(&self.ctx, Domain::Coefficient);
        for ((dst, src), limb) in out.limbs.iter_mut().zip(&self.limbs).zip(&self.ctx.limbs) {
            let q = limb.modulus();
            let b = q.reduce_i64(coeff);
            let b_neg = q.neg(b);
            let (bs, bns) = (q.shoup(b), q.shoup(b_neg));
            let split = n - k;
            for (d, &c) in dst[k..].iter_mut().zip(&src[..split]) {
                *d = q.mul_shoup(c, b, bs);
            }
            for (d, &c) in dst[..k].iter_mut().zip(&src[split..]) {
                *d = q.mul_shoup(c, b_neg, bns);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for ((a, b), limb) in self.limbs.iter_mut().zip(&other.limbs).zip(&self.ctx.limbs) {
            let q = limb.modulus();
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.add(*x, y);
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for ((a, b), limb) in out.limbs.iter_mut().zip(&other.limbs).zip(&self.ctx.limbs) {
            let q = limb.modulus();
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.sub(*x, y);
            }
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for (a, limb) in out.limbs.iter_mut().zip(&self.ctx.limbs) {
            let q = limb.modulus();
            for x in a.iter_mut() {
                *x = q.neg(*x);
            }
        }
        out
    }

    /// Multiplies every coefficient by a signed integer scalar.
    pub fn scalar_mul(&self, scalar: i64) -> Self {
        let residues: Vec<u64> = self
            .ctx
            .limbs
            .iter()
            .map(|l| l.modulus().reduce_i64(scalar))
            .collect();
        self.scalar_mul_rns(&residues)
    }

    /// Multiplies limb `i` by `residues[i]`; used for scalars wider than a word.
    pub fn scalar_mul_rns(&self, residues: &[u64]) -> Self {
        let mut out = self.clone();
        for ((a, limb), &s) in out.limbs.iter_mut().zip(&self.ctx.limbs).zip(residues) {
            let q = limb.modulus();
            let ss = q.shoup(s);
            for x in a.iter_mut() {
                *x = q.mul_shoup(*x, s, ss);
            }
        }
        out
    }

    /// Keeps the first `ctx.limbs().len()` limbs, re-homing the polynomial in
    /// a context whose moduli are a prefix of this one's.
    pub fn truncate_limbs(&self, ctx: &Arc<RingContext>) -> Result<Self> {
        let k = ctx.limbs.len();
        if ctx.n != self.ctx.n || k > self.limbs.len() || ctx.limbs[..] != self.ctx.limbs[..k] {
            return Err(Error::ParamMismatch("target ring is not a limb prefix".into()));
        }
        Ok(Self {
            ctx: ctx.clone(),
            limbs: self.limbs[..k].to_vec(),
            domain: self.domain,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx17() -> Arc<RingContext> {
        RingContext::new(4, &[17]).unwrap()
    }

    fn coeffs(p: &RingPoly) -> Vec<u64> {
        p.limbs()[0].clone()
    }

    fn random_poly(ctx: &Arc<RingContext>, rng: &mut impl Rng) -> RingPoly {
        let limbs = ctx
            .limbs()
            .iter()
            .map(|l| (0..ctx.n()).map(|_| rng.random_range(0..l.q())).collect())
            .collect();
        RingPoly::from_limbs(ctx, limbs, Domain::Coefficient).unwrap()
    }

    #[test]
    fn zero_transforms_to_zero() {
        let ctx = ctx17();
        let z = RingPoly::zero(&ctx, Domain::Coefficient);
        assert!(z.ntt_forward().unwrap().is_zero());
    }

    #[test]
    fn ntt_product_of_one_plus_x_squared() {
        let ctx = ctx17();
        let p = RingPoly::from_signed(&ctx, &[1, 1]).unwrap();
        let prod = p.mul_ntt(&p).unwrap();
        assert_eq!(coeffs(&prod), vec![1, 2, 1, 0]);
        assert_eq!(prod, p.mul_naive(&p).unwrap());
    }

    #[test]
    fn negacyclic_wrap() {
        let ctx = ctx17();
        let x3 = RingPoly::monomial(&ctx, 3, 1).unwrap();
        let x = RingPoly::monomial(&ctx, 1, 1).unwrap();
        assert_eq!(coeffs(&x3.mul_ntt(&x).unwrap()), vec![16, 0, 0, 0]);
        assert_eq!(coeffs(&x3.mul_monomial(1, 1).unwrap()), vec![16, 0, 0, 0]);
    }

    #[test]
    fn identities() {
        let ctx = RingContext::new(16, &[97, 193]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_poly(&ctx, &mut rng);
        let one = RingPoly::monomial(&ctx, 0, 1).unwrap();
        let zero = RingPoly::zero(&ctx, Domain::Coefficient);
        assert_eq!(a.mul_ntt(&one).unwrap(), a);
        assert_eq!(a.mul_monomial(0, 1).unwrap(), a);
        assert!(a.mul_naive(&zero).unwrap().is_zero());
        assert_eq!(a.add(&zero).unwrap(), a);
        assert!(a.add(&a.neg()).unwrap().is_zero());
    }

    #[test]
    fn errors() {
        let ctx = ctx17();
        let other = RingContext::new(4, &[41]).unwrap();
        let a = RingPoly::monomial(&ctx, 1, 1).unwrap();
        let b = RingPoly::monomial(&other, 1, 1).unwrap();
        assert!(matches!(a.add(&b), Err(Error::ParamMismatch(_))));
        assert!(matches!(a.mul_ntt(&b), Err(Error::ParamMismatch(_))));
        assert!(matches!(a.mul_monomial(4, 1), Err(Error::OutOfRange(_))));
        let an = a.ntt_forward().unwrap();
        assert!(matches!(an.ntt_forward(), Err(Error::DomainMismatch)));
        assert!(matches!(a.ntt_inverse(), Err(Error::DomainMismatch)));
        assert!(matches!(an.mul_monomial(0, 1), Err(Error::DomainMismatch)));
        assert!(matches!(a.add(&an), Err(Error::DomainMismatch)));
    }

    #[test]
    fn ntt_matches_naive_at_1024() {
        let ctx = RingContext::new(1024, &[30296486258802689, 30296486253035521]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..64 {
            let a = random_poly(&ctx, &mut rng);
            let b = random_poly(&ctx, &mut rng);
            assert_eq!(a.mul_ntt(&b).unwrap(), a.mul_naive(&b).unwrap());
        }
    }

    #[test]
    fn ntt_round_trip_many() {
        let ctx = RingContext::new(256, &[30296486258802689, 30296486253035521]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = random_poly(&ctx, &mut rng);
            assert_eq!(a.ntt_forward().unwrap().ntt_inverse().unwrap(), a);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn products_agree(seed: u64, log_n in 1u32..7) {
            let n = 1usize << log_n;
            let ctx = RingContext::new(n, &[12289, 40961]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_poly(&ctx, &mut rng);
            let b = random_poly(&ctx, &mut rng);
            let naive = a.mul_naive(&b).unwrap();
            prop_assert_eq!(&a.mul_ntt(&b).unwrap(), &naive);
            prop_assert_eq!(&b.mul_naive(&a).unwrap(), &naive);
        }

        #[test]
        fn monomial_agrees_with_ntt(seed: u64, k in 0usize..64, coeff: i64) {
            let ctx = RingContext::new(64, &[12289, 40961]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_poly(&ctx, &mut rng);
            let m = RingPoly::monomial(&ctx, k, coeff).unwrap();
            prop_assert_eq!(c.mul_monomial(k, coeff).unwrap(), c.mul_ntt(&m).unwrap());
        }

        #[test]
        fn addition_is_associative(seed: u64) {
            let ctx = RingContext::new(32, &[12289, 40961]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_poly(&ctx, &mut rng), random_poly(&ctx, &mut rng), random_poly(&ctx, &mut rng));
            prop_assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
            prop_assert_eq!(a.sub(&b).unwrap().add(&b).unwrap(), a.clone());
            prop_assert_eq!(a.scalar_mul(-3), a.neg().add(&a.neg()).unwrap().add(&a.neg()).unwrap());
        }
    }
}
