//! The evaluating side. It holds the model, the parameters and the public
//! evaluation keys; it never sees a secret key.

use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::Arc;
use std::time::Duration;

use super::frame::{decode_ciphertexts, encode_ciphertexts, read_frame, write_frame, MsgType, DEFAULT_PAYLOAD_CAP};
use crate::engine::{compile, eval_lanes, CipherTensor, CompiledNetwork, HopCounter, NetworkSpec};
use crate::error::{Error, Result};
use crate::fv::{EncryptionParams, EvalKeys};

pub struct InferenceService {
    params: Arc<EncryptionParams>,
    ek: EvalKeys,
    plan: CompiledNetwork,
    payload_cap: u64,
}

impl InferenceService {
    pub fn new(ek: EvalKeys, net: &NetworkSpec, precision_bits: u32) -> Result<Self> {
        Ok(Self {
            params: ek.params().clone(),
            plan: compile(net, precision_bits)?,
            ek,
            payload_cap: DEFAULT_PAYLOAD_CAP,
        })
    }

    pub fn with_payload_cap(mut self, cap: u64) -> Self {
        self.payload_cap = cap;
        self
    }

    pub fn params(&self) -> &Arc<EncryptionParams> {
        &self.params
    }

    /// Evaluates one request payload: lane-major input ciphertexts in,
    /// lane-major output ciphertexts out.
    pub fn handle(&self, payload: &[u8]) -> Result<(Vec<u8>, HopCounter)> {
        let cts = decode_ciphertexts(&self.params, payload)?;
        let lanes = self.params.lanes().len();
        let per = self.plan.input_shape.len();
        if cts.len() != lanes * per {
            return Err(Error::Shape(format!(
                "expected {lanes} x {per} ciphertexts for input {}, got {}",
                self.plan.input_shape,
                cts.len()
            )));
        }
        let mut inputs = Vec::with_capacity(lanes);
        let mut it = cts.into_iter();
        for j in 0..lanes {
            let t = CipherTensor::new(self.plan.input_shape, it.by_ref().take(per).collect())?;
            if t.lane() != j {
                return Err(Error::LaneMismatch { left: j, right: t.lane() });
            }
            inputs.push(t);
        }
        let (outs, hops) = eval_lanes(&self.plan, &inputs, &self.ek)?;
        let flat: Vec<_> = outs.into_iter().flat_map(CipherTensor::into_elems).collect();
        Ok((encode_ciphertexts(&self.params, &flat)?, hops))
    }

    /// Answers requests on one connection until the peer closes it. Failures
    /// are reported to the peer as error frames.
    pub fn serve_connection(&self, stream: TcpStream, on_request: &(dyn Fn(&HopCounter) + Sync)) -> Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream.try_clone()?);
        loop {
            let frame = match read_frame(&mut reader, self.payload_cap) {
                Ok(Some(f)) => f,
                Ok(None) => return Ok(()),
                Err(e @ Error::Protocol(_)) => {
                    // best effort: the peer may already be gone
                    let _ = write_frame(&mut writer, MsgType::Error, e.to_string().as_bytes());
                    linger(&stream, &mut reader);
                    return Err(e);
                }
                Err(e) => return Err(e),
            };
            let reply = match frame.kind {
                MsgType::InferRequest => self.handle(&frame.payload),
                other => Err(Error::Protocol(format!("unexpected {other:?} frame"))),
            };
            match reply {
                Ok((payload, hops)) => {
                    on_request(&hops);
                    write_frame(&mut writer, MsgType::InferResponse, &payload)?;
                }
                Err(e) => write_frame(&mut writer, MsgType::Error, e.to_string().as_bytes())?,
            }
        }
    }

    /// Accepts connections, each on its own thread. Stops after
    /// `max_connections` when given.
    pub fn serve(
        &self,
        listener: &TcpListener,
        max_connections: Option<usize>,
        on_request: &(dyn Fn(&HopCounter) + Sync),
    ) -> Result<()> {
        std::thread::scope(|scope| {
            for (i, stream) in listener.incoming().enumerate() {
                if max_connections.is_some_and(|m| i >= m) {
                    break;
                }
                let stream = stream?;
                scope.spawn(move || {
                    // a failed connection does not stop the server
                    let _ = self.serve_connection(stream, on_request);
                });
                if max_connections.is_some_and(|m| i + 1 >= m) {
                    break;
                }
            }
            Ok(())
        })
    }
}

/// Half-closes and swallows what the peer is still sending, so it can read
/// the error frame instead of seeing a reset.
fn linger(stream: &TcpStream, reader: &mut impl std::io::Read) {
    let _ = stream.shutdown(Shutdown::Write);
    let _ = stream.set_read_timeout(Some(Duration::from_secs(2)));
    let _ = std::io::copy(reader, &mut std::io::sink());
}
