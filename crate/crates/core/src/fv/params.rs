use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::{ntt_primes_below, BaseExtender, Modulus, RingContext, RnsBasis};

/// Default limb primes: four primes congruent to 1 modulo 2^17 (so every ring
/// degree up to 65536 has an NTT) whose product has 219 bits.
pub const DEFAULT_LIMBS: [u64; 4] = [
    30296486258802689,
    30296486253035521,
    30296486245826561,
    30296486245564417,
];
pub const DEFAULT_N: usize = 8192;
/// Single-lane default plaintext modulus.
pub const DEFAULT_T: u64 = 1099511922689;
/// Second lane of the two-lane configuration.
pub const SECOND_T: u64 = 1099512004609;
pub const DEFAULT_BETA: u64 = 1 << 32;
pub const DEFAULT_NOISE_STDDEV: f64 = 3.2;
/// Ring degrees accepted for encryption parameters.
pub const SUPPORTED_N: [usize; 6] = [1024, 2048, 4096, 8192, 16384, 32768];
/// Minimum headroom in bits between q and every plaintext modulus.
const MIN_HEADROOM_BITS: u64 = 32;
const AUX_PRIME_BITS: u32 = 59;

/// Per-lane constants: the plaintext modulus and `Δ = floor(q / t)`.
#[derive(Debug)]
pub struct Lane {
    pub t: u64,
    pub delta: BigUint,
    pub(crate) delta_rns: Vec<u64>,
}

/// FV parameters: ring degree, the RNS ciphertext modulus, plaintext lanes,
/// the relinearization base and the error distribution width.
#[derive(Debug)]
pub struct EncryptionParams {
    ring: Arc<RingContext>,
    basis: RnsBasis,
    lanes: Vec<Lane>,
    beta_bits: u32,
    ell: usize,
    noise_stddev: f64,
    // tensoring ring: the q limbs followed by auxiliary limbs
    ext_ring: Arc<RingContext>,
    ext_basis: RnsBasis,
    extender: BaseExtender,
    // rounding t * Y / q happens on the auxiliary limbs, then comes back
    aux_moduli: Vec<Modulus>,
    q_inv_aux: Vec<u64>,
    aux_to_q: BaseExtender,
    q_half: BigUint,
}

impl EncryptionParams {
    pub fn new(n: usize, limbs: &[u64], t_lanes: &[u64], beta: u64, noise_stddev: f64) -> Result<Arc<Self>> {
        if !SUPPORTED_N.contains(&n) {
            return Err(Error::InvalidParams(format!(
                "ring degree {n} not in {SUPPORTED_N:?}"
            )));
        }
        let ring = RingContext::new(n, limbs)?;
        let basis = RnsBasis::new(limbs);
        let q = basis.product().clone();
        let q_bits = q.bits();

        if t_lanes.is_empty() {
            return Err(Error::InvalidParams("at least one plaintext modulus required".into()));
        }
        for (i, &t) in t_lanes.iter().enumerate() {
            if t < 2 {
                return Err(Error::InvalidParams(format!("plaintext modulus {t} too small")));
            }
            if q_bits < 64 - t.leading_zeros() as u64 + MIN_HEADROOM_BITS {
                return Err(Error::InvalidParams(format!(
                    "plaintext modulus {t} too large for a {q_bits}-bit ciphertext modulus"
                )));
            }
            if let Some(&u) = t_lanes[..i].iter().find(|&&u| u.gcd(&t) != 1) {
                return Err(Error::InvalidParams(format!(
                    "plaintext moduli {u} and {t} are not coprime"
                )));
            }
        }
        if !beta.is_power_of_two() || beta < 2 || beta.trailing_zeros() > 62 {
            return Err(Error::InvalidParams(format!(
                "decomposition base {beta} must be a power of two in [2, 2^62]"
            )));
        }
        if !(noise_stddev > 0.0 && noise_stddev.is_finite()) {
            return Err(Error::InvalidParams(format!("noise deviation {noise_stddev} must be positive")));
        }

        let beta_bits = beta.trailing_zeros();
        // q is never a power of two, so floor(log_beta q) = (bits(q) - 1) / log2(beta)
        let ell = ((q_bits - 1) / beta_bits as u64) as usize;

        let lanes = t_lanes
            .iter()
            .map(|&t| {
                let delta = &q / t;
                let delta_rns = basis.residues_of(&delta);
                Lane { t, delta, delta_rns }
            })
            .collect();

        // Products of centered operands reach n q^2 / 2 in magnitude and
        // their rescaled values t n q / 2; the auxiliary product covers both.
        let t_bits = t_lanes.iter().map(|t| 64 - t.leading_zeros() as u64).max().unwrap_or(0);
        let needed_bits = q_bits + n.trailing_zeros() as u64 + t_bits + 4;
        let aux_count = needed_bits.div_ceil(AUX_PRIME_BITS as u64 - 1) as usize;
        let aux = ntt_primes_below(AUX_PRIME_BITS, n, aux_count, limbs);
        if aux.len() != aux_count {
            return Err(Error::InvalidParams("could not find auxiliary NTT primes".into()));
        }
        let ext_moduli: Vec<u64> = limbs.iter().chain(&aux).copied().collect();
        let ext_ring = RingContext::new(n, &ext_moduli)?;
        let ext_basis = RnsBasis::new(&ext_moduli);
        let extender = BaseExtender::new(basis.clone(), &aux);
        let aux_moduli: Vec<Modulus> = aux.iter().map(|&p| Modulus::new(p).expect("prime")).collect();
        let q_inv_aux = aux_moduli
            .iter()
            .map(|p| {
                let q_mod = (&q % p.value()).iter_u64_digits().next().unwrap_or(0);
                p.inv(q_mod).expect("q coprime to auxiliary primes")
            })
            .collect();
        let aux_to_q = BaseExtender::new(RnsBasis::new(&aux), limbs);
        let q_half = &q >> 1;

        Ok(Arc::new(Self {
            ring,
            basis,
            lanes,
            beta_bits,
            ell,
            noise_stddev,
            ext_ring,
            ext_basis,
            extender,
            aux_moduli,
            q_inv_aux,
            aux_to_q,
            q_half,
        }))
    }

    /// The default single-lane parameter set at the given ring degree.
    pub fn default_with_degree(n: usize) -> Result<Arc<Self>> {
        Self::new(n, &DEFAULT_LIMBS, &[DEFAULT_T], DEFAULT_BETA, DEFAULT_NOISE_STDDEV)
    }

    pub fn n(&self) -> usize {
        self.ring.n()
    }

    pub fn ring(&self) -> &Arc<RingContext> {
        &self.ring
    }

    pub fn basis(&self) -> &RnsBasis {
        &self.basis
    }

    pub fn moduli(&self) -> Vec<u64> {
        self.ring.moduli()
    }

    pub fn q(&self) -> &BigUint {
        self.basis.product()
    }

    pub fn q_bits(&self) -> u64 {
        self.q().bits()
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn lane(&self, lane: usize) -> Result<&Lane> {
        self.lanes.get(lane).ok_or_else(|| {
            Error::OutOfRange(format!("lane {lane} of {} plaintext moduli", self.lanes.len()))
        })
    }

    pub fn t_lanes(&self) -> Vec<u64> {
        self.lanes.iter().map(|l| l.t).collect()
    }

    pub fn beta(&self) -> u64 {
        1u64 << self.beta_bits
    }

    pub fn beta_bits(&self) -> u32 {
        self.beta_bits
    }

    /// Number of relinearization key pairs minus one: `floor(log_beta q)`.
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn noise_stddev(&self) -> f64 {
        self.noise_stddev
    }

    pub(crate) fn ext_ring(&self) -> &Arc<RingContext> {
        &self.ext_ring
    }

    pub(crate) fn ext_basis(&self) -> &RnsBasis {
        &self.ext_basis
    }

    pub(crate) fn extender(&self) -> &BaseExtender {
        &self.extender
    }

    pub(crate) fn aux_moduli(&self) -> &[Modulus] {
        &self.aux_moduli
    }

    /// `q^{-1}` modulo each auxiliary prime.
    pub(crate) fn q_inv_aux(&self) -> &[u64] {
        &self.q_inv_aux
    }

    pub(crate) fn aux_to_q(&self) -> &BaseExtender {
        &self.aux_to_q
    }

    pub(crate) fn q_half(&self) -> &BigUint {
        &self.q_half
    }

    /// SHA-256 over a canonical rendering of everything that affects
    /// ciphertext compatibility.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"hopnet-params-v1");
        h.update((self.n() as u64).to_le_bytes());
        for q in self.moduli() {
            h.update(q.to_le_bytes());
        }
        h.update([0xff; 8]);
        for t in self.t_lanes() {
            h.update(t.to_le_bytes());
        }
        h.update([0xff; 8]);
        h.update(self.beta().to_le_bytes());
        h.update(self.noise_stddev.to_bits().to_le_bytes());
        h.finalize().into()
    }

    pub fn same_as(&self, other: &Self) -> bool {
        std::ptr::eq(self, other) || self.digest() == other.digest()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params() {
        let p = EncryptionParams::default_with_degree(8192).unwrap();
        assert_eq!(p.q_bits(), 219);
        assert_eq!(p.ell(), 6);
        assert_eq!(p.beta(), 1 << 32);
        assert_eq!(p.lanes()[0].delta, p.q() / DEFAULT_T);
        // the tensoring basis must hold n * q^2
        assert!(p.ext_basis().product().bits() > 2 * 219 + 13 + 1);
    }

    #[test]
    fn rejects_invalid() {
        let bad_n = EncryptionParams::new(512, &DEFAULT_LIMBS, &[DEFAULT_T], DEFAULT_BETA, 3.2);
        assert!(bad_n.is_err());
        let huge_t = EncryptionParams::new(1024, &DEFAULT_LIMBS[..1], &[DEFAULT_T], DEFAULT_BETA, 3.2);
        assert!(huge_t.is_err());
        let shared = EncryptionParams::new(1024, &DEFAULT_LIMBS, &[65537, 65537 * 3], DEFAULT_BETA, 3.2);
        assert!(shared.is_err());
        let beta = EncryptionParams::new(1024, &DEFAULT_LIMBS, &[65537], 3, 3.2);
        assert!(beta.is_err());
        let sigma = EncryptionParams::new(1024, &DEFAULT_LIMBS, &[65537], 1 << 16, 0.0);
        assert!(sigma.is_err());
    }

    #[test]
    fn digest_tracks_parameters() {
        let a = EncryptionParams::default_with_degree(1024).unwrap();
        let b = EncryptionParams::default_with_degree(1024).unwrap();
        let c = EncryptionParams::new(1024, &DEFAULT_LIMBS, &[DEFAULT_T, SECOND_T], DEFAULT_BETA, 3.2).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }
}
