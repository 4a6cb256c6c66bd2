//! Client/server framing.
//!
//! Every message is a frame: `"FCNP"`, a version byte, a type byte
//! (`0x01` request, `0x02` response, `0x03` error) and a `u64` little-endian
//! payload length. Request and response payloads carry the 32-byte parameter
//! digest, a `u32` ciphertext count and the ciphertexts, lane-major. Error
//! payloads are UTF-8 text.

mod client;
mod frame;
mod server;

pub use client::{build_request, exchange, infer_remote, open_response};
pub use frame::{
    decode_ciphertexts, encode_ciphertexts, read_frame, request_bytes, write_frame, Frame, MsgType,
    DEFAULT_PAYLOAD_CAP, FRAME_HEADER_BYTES, FRAME_MAGIC, PAYLOAD_PREFIX_BYTES, PROTOCOL_VERSION,
};
pub use server::InferenceService;

/// Source of the evaluating side, for audits that it never decrypts.
pub const SERVER_SOURCE: &str = include_str!("server.rs");

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{eval_plain, tiny_network, NetworkSpec};
    use crate::fv::{keygen, EncryptionParams, DEFAULT_LIMBS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::net::{TcpListener, TcpStream};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn params(t: &[u64]) -> std::sync::Arc<EncryptionParams> {
        EncryptionParams::new(1024, &DEFAULT_LIMBS, t, 1 << 32, 3.2).unwrap()
    }

    #[test]
    fn loopback_matches_plain() {
        let p = params(&[65537, 114689]);
        let (sk, pk, ek) = keygen(&p, 5);
        let net: NetworkSpec = tiny_network(2);
        let service = InferenceService::new(ek, &net, 12).unwrap();
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let served = AtomicUsize::new(0);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..net.input.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        std::thread::scope(|s| {
            s.spawn(|| {
                service
                    .serve(&listener, Some(1), &|_| {
                        served.fetch_add(1, Ordering::Relaxed);
                    })
                    .unwrap()
            });
            let got = infer_remote(addr, &sk, &pk, &x, 12, &mut rng).unwrap();
            let want = eval_plain(&net, &x).unwrap();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-2, "{g} vs {w}");
            }
        });
        assert_eq!(served.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn digest_mismatch_is_an_error_frame() {
        let (_, _, ek) = keygen(&params(&[65537]), 5);
        let (_, pk_other, _) = keygen(&params(&[114689]), 5);
        let net = tiny_network(0);
        let service = InferenceService::new(ek, &net, 10).unwrap();
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = vec![0.5; net.input.len()];
        std::thread::scope(|s| {
            s.spawn(|| service.serve(&listener, Some(2), &|_| {}).unwrap());
            let payload = build_request(&pk_other, &x, 10, &mut rng).unwrap();
            let stream = TcpStream::connect(addr).unwrap();
            let err = exchange(&stream, &payload, DEFAULT_PAYLOAD_CAP).unwrap_err();
            assert!(err.to_string().contains("digest"), "{err}");
            // the connection stays usable after an error frame
            let err = exchange(&stream, &payload[..10], DEFAULT_PAYLOAD_CAP).unwrap_err();
            assert!(err.to_string().contains("server:"), "{err}");
            drop(stream);

            let stream = TcpStream::connect(addr).unwrap();
            let mut w = &stream;
            write_frame(&mut w, MsgType::InferResponse, b"").unwrap();
            let mut r = &stream;
            let f = read_frame(&mut r, 1 << 20).unwrap().unwrap();
            assert_eq!(f.kind, MsgType::Error);
        });
    }

    #[test]
    fn oversize_payload_is_refused() {
        let (_, pk, ek) = keygen(&params(&[65537]), 5);
        let net = tiny_network(0);
        let service = InferenceService::new(ek, &net, 10).unwrap().with_payload_cap(1024);
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = vec![0.5; net.input.len()];
        std::thread::scope(|s| {
            s.spawn(|| service.serve(&listener, Some(1), &|_| {}).unwrap());
            let payload = build_request(&pk, &x, 10, &mut rng).unwrap();
            let stream = TcpStream::connect(addr).unwrap();
            let err = exchange(&stream, &payload, DEFAULT_PAYLOAD_CAP).unwrap_err();
            assert!(err.to_string().contains("cap"), "{err}");
        });
    }

    #[test]
    fn payload_round_trip_is_byte_exact() {
        let p = params(&[65537, 114689]);
        let (_, pk, _) = keygen(&p, 5);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let payload = build_request(&pk, &[0.25, -1.5, 3.0], 8, &mut rng).unwrap();
        let cts = decode_ciphertexts(&p, &payload).unwrap();
        assert_eq!(cts.len(), 6);
        assert_eq!(encode_ciphertexts(&p, &cts).unwrap(), payload);
        let mut tampered = payload.clone();
        tampered[0] ^= 0xff;
        assert!(decode_ciphertexts(&p, &tampered).is_err());
    }

    #[test]
    fn server_has_no_decrypt_path() {
        assert!(!SERVER_SOURCE.contains("decrypt"));
        assert!(!SERVER_SOURCE.contains("SecretKey"));
    }

    #[test]
    fn request_size_for_mnist_input() {
        assert_eq!(FRAME_HEADER_BYTES + PAYLOAD_PREFIX_BYTES, 50);
        let p = EncryptionParams::new(8192, &DEFAULT_LIMBS, &[65537], 1 << 32, 3.2).unwrap();
        assert_eq!(request_bytes(&p, 784), 784 * 65544 * 8 + 50);
    }
}
