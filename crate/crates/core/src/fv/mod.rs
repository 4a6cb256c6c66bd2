//! The FV scheme over RNS polynomials, with several plaintext moduli
//! ("lanes") sharing one ciphertext modulus and one key set.

mod ciphertext;
mod keys;
mod params;
mod plaintext;
pub mod sample;

pub use ciphertext::{
    add_ct, add_ct_assign, add_pt, decrypt, decrypt_checked, encrypt, mul_ct, mul_pt, mul_pt_with, noise_budget,
    Ciphertext, MulStrategy, NOISE_FLOOR_BITS,
};
pub use keys::{keygen, keygen_with_rng, EvalKeys, PublicKey, SecretKey};
pub use params::{
    EncryptionParams, Lane, DEFAULT_BETA, DEFAULT_LIMBS, DEFAULT_N, DEFAULT_NOISE_STDDEV, DEFAULT_T, SECOND_T,
    SUPPORTED_N,
};
pub use plaintext::Plaintext;
