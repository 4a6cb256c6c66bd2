use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};

use rand::Rng;

use super::frame::{decode_ciphertexts, encode_ciphertexts, read_frame, write_frame, MsgType, DEFAULT_PAYLOAD_CAP};
use crate::engine::{decrypt_output, encrypt_input, CipherTensor, Shape};
use crate::error::{Error, Result};
use crate::fv::{PublicKey, SecretKey};

/// Encrypts `input` for every lane and packs the request payload.
pub fn build_request<R: Rng + ?Sized>(pk: &PublicKey, input: &[f64], precision_bits: u32, rng: &mut R) -> Result<Vec<u8>> {
    let lanes = encrypt_input(pk, Shape::flat(input.len()), input, precision_bits, rng)?;
    let flat: Vec<_> = lanes.into_iter().flat_map(CipherTensor::into_elems).collect();
    encode_ciphertexts(pk.params(), &flat)
}

/// Decrypts a response payload into real scores.
pub fn open_response(sk: &SecretKey, payload: &[u8]) -> Result<Vec<f64>> {
    let cts = decode_ciphertexts(sk.params(), payload)?;
    let lanes = sk.params().lanes().len();
    if cts.is_empty() || cts.len() % lanes != 0 {
        return Err(Error::Protocol(format!("{} output ciphertexts for {lanes} lanes", cts.len())));
    }
    let per = cts.len() / lanes;
    let mut it = cts.into_iter();
    let tensors = (0..lanes)
        .map(|_| CipherTensor::new(Shape::flat(per), it.by_ref().take(per).collect()))
        .collect::<Result<Vec<_>>>()?;
    decrypt_output(sk, &tensors)
}

/// One request/response exchange over an open connection.
pub fn exchange(stream: &TcpStream, payload: &[u8], cap: u64) -> Result<Vec<u8>> {
    let mut writer = BufWriter::new(stream);
    let sent = write_frame(&mut writer, MsgType::InferRequest, payload);
    drop(writer);
    // a refused request may still have an error frame waiting
    let mut reader = BufReader::new(stream);
    let frame = match (read_frame(&mut reader, cap), sent) {
        (Ok(Some(f)), _) => f,
        (_, Err(e)) => return Err(e),
        (Ok(None), Ok(())) => return Err(Error::Protocol("server closed the connection".into())),
        (Err(e), Ok(())) => return Err(e),
    };
    match frame.kind {
        MsgType::InferResponse => Ok(frame.payload),
        MsgType::Error => Err(Error::Protocol(format!(
            "server: {}",
            String::from_utf8_lossy(&frame.payload)
        ))),
        MsgType::InferRequest => Err(Error::Protocol("server sent a request frame".into())),
    }
}

/// Encrypts, sends, waits and decrypts.
pub fn infer_remote<A: ToSocketAddrs, R: Rng + ?Sized>(
    addr: A,
    sk: &SecretKey,
    pk: &PublicKey,
    input: &[f64],
    precision_bits: u32,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let payload = build_request(pk, input, precision_bits, rng)?;
    let stream = TcpStream::connect(addr)?;
    let response = exchange(&stream, &payload, DEFAULT_PAYLOAD_CAP)?;
    open_response(sk, &response)
}
