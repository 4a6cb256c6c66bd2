//! Arithmetic in the negacyclic ring `Z_q[x]/(x^n + 1)` with the modulus `q`
//! split into word-sized prime limbs.

mod modulus;
mod ntt;
mod poly;
mod rns;

pub use modulus::{is_prime, ntt_primes_below, primitive_root_of_unity, Modulus};
pub use ntt::ModulusLimb;
pub use poly::{Domain, RingContext, RingPoly};
pub use rns::{BaseExtender, RnsBasis};
