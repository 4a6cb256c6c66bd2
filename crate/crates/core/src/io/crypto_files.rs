//! Word-oriented binary formats for ciphertexts and keys.
//!
//! Every object starts with an 8-word header of little-endian `u64`s:
//!
//! | word | ciphertext            | key file                      |
//! |------|-----------------------|-------------------------------|
//! | 0    | `0x46434E5031000000`  | `0x46434E53…`/`…4B…`/`…45…`   |
//! | 1    | format version 1      | format version 1              |
//! | 2    | ring degree n         | ring degree n                 |
//! | 3    | limb count k          | limb count k                  |
//! | 4    | lane                  | polynomial count              |
//! | 5    | scale exponent (i64)  | 0                             |
//! | 6    | multiplicative depth  | 0                             |
//! | 7    | 0                     | parameter digest word         |
//!
//! followed by the polynomials in coefficient form, limb-major, one word per
//! coefficient. The digest word is the first 8 bytes of the parameter digest.
//! Ciphertexts carry no digest; the wire frame does.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fv::{Ciphertext, EncryptionParams, EvalKeys, PublicKey, SecretKey};
use crate::ring::{Domain, RingPoly};

pub const HEADER_WORDS: usize = 8;

pub const FORMAT_VERSION: u64 = 1;

/// `"FCNP1"` read as a big-endian word.
pub const CIPHERTEXT_MAGIC: u64 = 0x4643_4E50_3100_0000;
pub const SECRET_KEY_MAGIC: u64 = 0x4643_4E53_3100_0000;
pub const PUBLIC_KEY_MAGIC: u64 = 0x4643_4E4B_3100_0000;
pub const EVAL_KEY_MAGIC: u64 = 0x4643_4E45_3100_0000;

/// Words in one serialized ciphertext.
pub fn ciphertext_words(n: usize, limbs: usize) -> usize {
    HEADER_WORDS + 2 * n * limbs
}

pub fn ciphertext_bytes(params: &EncryptionParams) -> usize {
    8 * ciphertext_words(params.n(), params.moduli().len())
}

fn digest_word(params: &EncryptionParams) -> u64 {
    let d = params.digest();
    u64::from_le_bytes(d[..8].try_into().expect("32-byte digest"))
}

fn put(out: &mut Vec<u8>, w: u64) {
    out.extend_from_slice(&w.to_le_bytes());
}

fn put_poly(out: &mut Vec<u8>, p: &RingPoly) {
    let p = p.to_domain(Domain::Coefficient);
    for limb in p.limbs() {
        for &c in limb {
            put(out, c);
        }
    }
}

/// Sequential word reader over a byte slice.
struct Words<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Words<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn next(&mut self) -> Result<u64> {
        let end = self.pos + 8;
        let w = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("truncated file".into()))?;
        self.pos = end;
        Ok(u64::from_le_bytes(w.try_into().expect("8 bytes")))
    }

    fn poly(&mut self, params: &EncryptionParams) -> Result<RingPoly> {
        let n = params.n();
        let limbs = (0..params.moduli().len())
            .map(|_| (0..n).map(|_| self.next()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        RingPoly::from_limbs(params.ring(), limbs, Domain::Coefficient)
            .map_err(|_| Error::Format("coefficient not reduced modulo its limb".into()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

/// Validates the common words and returns words 4 to 7.
fn check_header(words: &mut Words<'_>, params: &EncryptionParams, want_magic: u64) -> Result<[u64; 4]> {
    let magic = words.next()?;
    if magic != want_magic {
        return Err(Error::Format(format!(
            "unexpected magic {:?}",
            String::from_utf8_lossy(&magic.to_be_bytes()).trim_end_matches('\0')
        )));
    }
    let version = words.next()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let (n, k) = (words.next()?, words.next()?);
    if n != params.n() as u64 || k != params.moduli().len() as u64 {
        return Err(Error::ParamMismatch(format!(
            "file is for n = {n} with {k} limbs, parameters have n = {} with {} limbs",
            params.n(),
            params.moduli().len()
        )));
    }
    Ok([words.next()?, words.next()?, words.next()?, words.next()?])
}

pub fn write_ciphertext(out: &mut Vec<u8>, params: &EncryptionParams, ct: &Ciphertext) {
    put(out, CIPHERTEXT_MAGIC);
    put(out, FORMAT_VERSION);
    put(out, params.n() as u64);
    put(out, params.moduli().len() as u64);
    put(out, ct.lane() as u64);
    put(out, ct.scale_exponent() as u64);
    put(out, ct.mul_depth() as u64);
    put(out, 0);
    put_poly(out, ct.c0());
    put_poly(out, ct.c1());
}

pub fn ciphertext_to_bytes(params: &EncryptionParams, ct: &Ciphertext) -> Vec<u8> {
    let mut out = Vec::with_capacity(ciphertext_bytes(params));
    write_ciphertext(&mut out, params, ct);
    out
}

pub fn ciphertext_from_bytes(params: &EncryptionParams, bytes: &[u8]) -> Result<Ciphertext> {
    let mut words = Words::new(bytes);
    let ct = read_ciphertext(&mut words, params)?;
    words.finish()?;
    Ok(ct)
}

fn read_ciphertext(words: &mut Words<'_>, params: &EncryptionParams) -> Result<Ciphertext> {
    let [lane, scale, depth, reserved] = check_header(words, params, CIPHERTEXT_MAGIC)?;
    if reserved != 0 {
        return Err(Error::Format("reserved header word is not zero".into()));
    }
    let c0 = words.poly(params)?;
    let c1 = words.poly(params)?;
    let depth = u32::try_from(depth).map_err(|_| Error::Format("depth out of range".into()))?;
    Ciphertext::from_parts(params, c0, c1, lane as usize, scale as i64, depth)
}

/// Reads `count` back-to-back ciphertexts.
pub fn ciphertexts_from_bytes(params: &EncryptionParams, bytes: &[u8], count: usize) -> Result<Vec<Ciphertext>> {
    let expected = count
        .checked_mul(ciphertext_bytes(params))
        .ok_or_else(|| Error::Format("ciphertext count overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("{count} ciphertexts need {expected} bytes, got {}", bytes.len())));
    }
    let mut words = Words::new(bytes);
    (0..count).map(|_| read_ciphertext(&mut words, params)).collect()
}

fn key_bytes(params: &EncryptionParams, magic: u64, polys: &[&RingPoly]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (HEADER_WORDS + polys.len() * params.n() * params.moduli().len()));
    put(&mut out, magic);
    put(&mut out, FORMAT_VERSION);
    put(&mut out, params.n() as u64);
    put(&mut out, params.moduli().len() as u64);
    put(&mut out, polys.len() as u64);
    put(&mut out, 0);
    put(&mut out, 0);
    put(&mut out, digest_word(params));
    for p in polys {
        put_poly(&mut out, p);
    }
    out
}

fn key_polys(params: &EncryptionParams, bytes: &[u8], magic: u64) -> Result<Vec<RingPoly>> {
    let mut words = Words::new(bytes);
    let [count, _, _, digest] = check_header(&mut words, params, magic)?;
    if digest != digest_word(params) {
        return Err(Error::ParamMismatch("key file was generated for other parameters".into()));
    }
    let per = 8 * params.n() * params.moduli().len();
    if (count as usize).checked_mul(per) != Some(bytes.len() - 8 * HEADER_WORDS) {
        return Err(Error::Format("polynomial count does not match file size".into()));
    }
    let polys = (0..count).map(|_| words.poly(params)).collect::<Result<Vec<_>>>()?;
    words.finish()?;
    Ok(polys)
}

pub fn secret_key_to_bytes(sk: &SecretKey) -> Vec<u8> {
    key_bytes(sk.params(), SECRET_KEY_MAGIC, &[sk.poly()])
}

pub fn public_key_to_bytes(pk: &PublicKey) -> Vec<u8> {
    let (p0, p1) = pk.polys();
    key_bytes(pk.params(), PUBLIC_KEY_MAGIC, &[p0, p1])
}

pub fn eval_keys_to_bytes(ek: &EvalKeys) -> Vec<u8> {
    let polys: Vec<&RingPoly> = ek.pairs().iter().flat_map(|(a, g)| [a, g]).collect();
    key_bytes(ek.params(), EVAL_KEY_MAGIC, &polys)
}

pub fn secret_key_from_bytes(params: &Arc<EncryptionParams>, bytes: &[u8]) -> Result<SecretKey> {
    let mut polys = key_polys(params, bytes, SECRET_KEY_MAGIC)?;
    if polys.len() != 1 {
        return Err(Error::Format("secret key holds one polynomial".into()));
    }
    SecretKey::from_poly(params, polys.remove(0))
}

pub fn public_key_from_bytes(params: &Arc<EncryptionParams>, bytes: &[u8]) -> Result<PublicKey> {
    let polys = key_polys(params, bytes, PUBLIC_KEY_MAGIC)?;
    match <[RingPoly; 2]>::try_from(polys) {
        Ok([p0, p1]) => PublicKey::from_polys(params, p0, p1),
        Err(_) => Err(Error::Format("public key holds two polynomials".into())),
    }
}

pub fn eval_keys_from_bytes(params: &Arc<EncryptionParams>, bytes: &[u8]) -> Result<EvalKeys> {
    let polys = key_polys(params, bytes, EVAL_KEY_MAGIC)?;
    if polys.len() % 2 != 0 {
        return Err(Error::Format("evaluation keys hold polynomial pairs".into()));
    }
    let mut it = polys.into_iter();
    let mut pairs = Vec::new();
    while let (Some(a), Some(g)) = (it.next(), it.next()) {
        pairs.push((a, g));
    }
    EvalKeys::from_pairs(params, pairs)
}

/// The magic word of a file, for telling key kinds apart before parsing.
pub fn peek_magic(path: &Path) -> Result<u64> {
    let mut buf = [0u8; 8];
    std::fs::File::open(path)?.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    Ok(())
}
