use std::io::{ErrorKind, Read, Write};

use crate::error::{Error, Result};
use crate::fv::{Ciphertext, EncryptionParams};
use crate::io::{ciphertext_bytes, ciphertexts_from_bytes, write_ciphertext};

pub const FRAME_MAGIC: &[u8; 4] = b"FCNP";
pub const PROTOCOL_VERSION: u8 = 1;
/// magic, version, type, u64 length
pub const FRAME_HEADER_BYTES: usize = 14;
/// Parameter digest plus ciphertext count.
pub const PAYLOAD_PREFIX_BYTES: usize = 36;
pub const DEFAULT_PAYLOAD_CAP: u64 = 2 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    InferRequest = 0x01,
    InferResponse = 0x02,
    Error = 0x03,
}

impl TryFrom<u8> for MsgType {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            0x01 => Ok(Self::InferRequest),
            0x02 => Ok(Self::InferResponse),
            0x03 => Ok(Self::Error),
            _ => Err(Error::Protocol(format!("unknown message type {v:#04x}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: MsgType,
    pub payload: Vec<u8>,
}

pub fn write_frame<W: Write>(w: &mut W, kind: MsgType, payload: &[u8]) -> Result<()> {
    let mut header = [0u8; FRAME_HEADER_BYTES];
    header[..4].copy_from_slice(FRAME_MAGIC);
    header[4] = PROTOCOL_VERSION;
    header[5] = kind as u8;
    header[6..].copy_from_slice(&(payload.len() as u64).to_le_bytes());
    w.write_all(&header)?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. `Ok(None)` means the peer closed cleanly between frames;
/// a close inside a frame is an error.
pub fn read_frame<R: Read>(r: &mut R, cap: u64) -> Result<Option<Frame>> {
    let mut header = [0u8; FRAME_HEADER_BYTES];
    let mut got = 0;
    while got < header.len() {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Protocol("connection closed mid-frame".into())),
            Ok(k) => got += k,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    if &header[..4] != FRAME_MAGIC {
        return Err(Error::Protocol("bad frame magic".into()));
    }
    if header[4] != PROTOCOL_VERSION {
        return Err(Error::Protocol(format!("unsupported protocol version {}", header[4])));
    }
    let kind = MsgType::try_from(header[5])?;
    let len = u64::from_le_bytes(header[6..].try_into().expect("8 bytes"));
    if len > cap {
        return Err(Error::Protocol(format!("payload of {len} bytes exceeds the {cap}-byte cap")));
    }
    let mut payload = Vec::new();
    r.take(len).read_to_end(&mut payload)?;
    if payload.len() as u64 != len {
        return Err(Error::Protocol("connection closed mid-frame".into()));
    }
    Ok(Some(Frame { kind, payload }))
}

/// Digest, `u32` count, then the ciphertexts back to back.
pub fn encode_ciphertexts(params: &EncryptionParams, cts: &[Ciphertext]) -> Result<Vec<u8>> {
    let count = u32::try_from(cts.len()).map_err(|_| Error::Protocol("too many ciphertexts".into()))?;
    let mut out = Vec::with_capacity(PAYLOAD_PREFIX_BYTES + cts.len() * ciphertext_bytes(params));
    out.extend_from_slice(&params.digest());
    out.extend_from_slice(&count.to_le_bytes());
    for ct in cts {
        write_ciphertext(&mut out, params, ct);
    }
    Ok(out)
}

pub fn decode_ciphertexts(params: &EncryptionParams, payload: &[u8]) -> Result<Vec<Ciphertext>> {
    if payload.len() < PAYLOAD_PREFIX_BYTES {
        return Err(Error::Protocol("payload shorter than its prefix".into()));
    }
    if payload[..32] != params.digest() {
        return Err(Error::ParamMismatch("parameter digest does not match".into()));
    }
    let count = u32::from_le_bytes(payload[32..36].try_into().expect("4 bytes")) as usize;
    ciphertexts_from_bytes(params, &payload[PAYLOAD_PREFIX_BYTES..], count)
}

/// Bytes on the wire for a request carrying `count` ciphertexts.
pub fn request_bytes(params: &EncryptionParams, count: usize) -> u64 {
    (FRAME_HEADER_BYTES + PAYLOAD_PREFIX_BYTES) as u64 + count as u64 * ciphertext_bytes(params) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn frame_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, MsgType::Error, b"bad digest").unwrap();
        assert_eq!(&buf[..6], b"FCNP\x01\x03");
        assert_eq!(buf.len(), FRAME_HEADER_BYTES + 10);
        let mut r = Cursor::new(buf.clone());
        let f = read_frame(&mut r, 1 << 20).unwrap().unwrap();
        assert_eq!(f.kind, MsgType::Error);
        assert_eq!(f.payload, b"bad digest");
        assert!(read_frame(&mut r, 1 << 20).unwrap().is_none());
        // truncated inside the payload and inside the header
        assert!(read_frame(&mut Cursor::new(&buf[..buf.len() - 1]), 1 << 20).is_err());
        assert!(read_frame(&mut Cursor::new(&buf[..5]), 1 << 20).is_err());
        // over the cap
        assert!(read_frame(&mut Cursor::new(buf.clone()), 5).is_err());
        let mut bad = buf;
        bad[5] = 9;
        assert!(read_frame(&mut Cursor::new(bad), 1 << 20).is_err());
    }
}
