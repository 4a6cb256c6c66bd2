//! Binary network container.
//!
//! ```text
//! "FCNW"  u16 version  u16 record count
//! record: u8 tag, then
//!   0 input      u8 ndims(=3) u32 c h w
//!   1 conv2d     tensor  u32 stride  u32 padding  bias
//!   2 dense      tensor  bias
//!   3 pool       u32 window  u32 stride  u32 padding  u8 reciprocal
//!   4 batchnorm  u32 channels  f64 scale[c]  f64 shift[c]
//!   5 activation u8 count  f64 coeffs[count] (ascending)
//! tensor: u8 ndims  u32 dims[ndims]  f64 values[N]  mask[ceil(N/8)]
//!         u8 quantized  (if 1) i16 exponents[N]
//! bias:   u8 present  (if 1) f64 values[out]
//! ```
//!
//! All integers and floats are little-endian. Mask bits are LSB first; a set
//! bit keeps the weight. The exponent array is present exactly when every
//! kept nonzero weight is a signed power of two; pruned or zero entries hold
//! `i16::MIN`. The first record is always the input shape.

use std::path::Path;

use crate::compress::WeightTensor;
use crate::engine::{Layer, NetworkSpec, Shape};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"FCNW";
pub const WEIGHTS_VERSION: u16 = 1;
const NO_EXPONENT: i16 = i16::MIN;

const TAG_INPUT: u8 = 0;
const TAG_CONV: u8 = 1;
const TAG_DENSE: u8 = 2;
const TAG_POOL: u8 = 3;
const TAG_BATCHNORM: u8 = 4;
const TAG_ACTIVATION: u8 = 5;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn tensor(&mut self, w: &WeightTensor) {
        self.u8(w.shape.len() as u8);
        for &d in &w.shape {
            self.u32(d);
        }
        self.f64s(&w.values);
        let mut bits = vec![0u8; w.len().div_ceil(8)];
        for (i, &keep) in w.mask.iter().enumerate() {
            if keep {
                bits[i / 8] |= 1 << (i % 8);
            }
        }
        self.0.extend_from_slice(&bits);
        match w.pow2_exponents() {
            Some(exps) => {
                self.u8(1);
                for e in exps {
                    let e = e.map_or(NO_EXPONENT, |(_, e)| e);
                    self.0.extend_from_slice(&e.to_le_bytes());
                }
            }
            None => self.u8(0),
        }
    }

    fn bias(&mut self, b: &Option<Vec<f64>>) {
        match b {
            Some(b) => {
                self.u8(1);
                self.f64s(b);
            }
            None => self.u8(0),
        }
    }
}

pub fn network_to_bytes(net: &NetworkSpec) -> Result<Vec<u8>> {
    let count = u16::try_from(net.layers.len() + 1).map_err(|_| Error::Format("too many layers".into()))?;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(WEIGHTS_MAGIC);
    w.0.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    w.0.extend_from_slice(&count.to_le_bytes());
    w.u8(TAG_INPUT);
    w.u8(3);
    for d in [net.input.c, net.input.h, net.input.w] {
        w.u32(d);
    }
    for layer in &net.layers {
        match layer {
            Layer::Conv2d {
                weights,
                bias,
                stride,
                padding,
            } => {
                w.u8(TAG_CONV);
                w.tensor(weights);
                w.u32(*stride);
                w.u32(*padding);
                w.bias(bias);
            }
            Layer::Dense { weights, bias } => {
                w.u8(TAG_DENSE);
                w.tensor(weights);
                w.bias(bias);
            }
            Layer::ScaledAvgPool {
                window,
                stride,
                padding,
                reciprocal,
            } => {
                w.u8(TAG_POOL);
                w.u32(*window);
                w.u32(*stride);
                w.u32(*padding);
                w.u8(u8::from(*reciprocal));
            }
            Layer::BatchNorm { scale, shift } => {
                w.u8(TAG_BATCHNORM);
                w.u32(scale.len());
                w.f64s(scale);
                w.f64s(shift);
            }
            Layer::PolyActivation { coeffs } => {
                w.u8(TAG_ACTIVATION);
                w.u8(coeffs.len() as u8);
                w.f64s(coeffs);
            }
        }
    }
    Ok(w.0)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("weights file truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflows".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn tensor(&mut self) -> Result<WeightTensor> {
        let ndims = self.u8()? as usize;
        let shape = (0..ndims).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        let values = self.f64s(len)?;
        let bits = self.take(len.div_ceil(8))?;
        let mask = (0..len).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect();
        let w = WeightTensor::with_mask(shape, values, mask)?;
        let expected = w.pow2_exponents();
        match (self.u8()?, expected) {
            (0, None) => {}
            (0, Some(_)) => return Err(Error::Format("power-of-two tensor stored without exponents".into())),
            (1, None) => return Err(Error::Format("exponents given for a tensor that is not power-of-two".into())),
            (1, Some(exps)) => {
                for (i, e) in exps.into_iter().enumerate() {
                    let stored = i16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes"));
                    if stored != e.map_or(NO_EXPONENT, |(_, e)| e) {
                        return Err(Error::Format(format!("exponent {i} does not match its weight")));
                    }
                }
            }
            (f, _) => return Err(Error::Format(format!("bad quantization flag {f}"))),
        }
        Ok(w)
    }

    fn bias(&mut self, out: usize) -> Result<Option<Vec<f64>>> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.f64s(out)?)),
            f => Err(Error::Format(format!("bad bias flag {f}"))),
        }
    }
}

pub fn network_from_bytes(bytes: &[u8]) -> Result<NetworkSpec> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != WEIGHTS_MAGIC {
        return Err(Error::Format("not a weights file".into()));
    }
    let version = r.u16()?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Format(format!("unsupported weights version {version}")));
    }
    let count = r.u16()? as usize;
    if count == 0 || r.u8()? != TAG_INPUT || r.u8()? != 3 {
        return Err(Error::Format("first record must be a 3-dimensional input shape".into()));
    }
    let input = Shape::new(r.u32()?, r.u32()?, r.u32()?);
    let mut layers = Vec::with_capacity(count - 1);
    for _ in 1..count {
        let layer = match r.u8()? {
            TAG_CONV => {
                let weights = r.tensor()?;
                let stride = r.u32()?;
                let padding = r.u32()?;
                let out = weights.shape.first().copied().unwrap_or(0);
                Layer::Conv2d {
                    weights,
                    bias: r.bias(out)?,
                    stride,
                    padding,
                }
            }
            TAG_DENSE => {
                let weights = r.tensor()?;
                let out = weights.shape.first().copied().unwrap_or(0);
                Layer::Dense {
                    bias: r.bias(out)?,
                    weights,
                }
            }
            TAG_POOL => Layer::ScaledAvgPool {
                window: r.u32()?,
                stride: r.u32()?,
                padding: r.u32()?,
                reciprocal: match r.u8()? {
                    0 => false,
                    1 => true,
                    f => return Err(Error::Format(format!("bad reciprocal flag {f}"))),
                },
            },
            TAG_BATCHNORM => {
                let c = r.u32()?;
                Layer::BatchNorm {
                    scale: r.f64s(c)?,
                    shift: r.f64s(c)?,
                }
            }
            TAG_ACTIVATION => {
                let k = r.u8()? as usize;
                Layer::PolyActivation { coeffs: r.f64s(k)? }
            }
            tag => return Err(Error::Format(format!("unknown layer tag {tag}"))),
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    NetworkSpec::new(input, layers)
}

pub fn load_network(path: &Path) -> Result<NetworkSpec> {
    network_from_bytes(&std::fs::read(path)?)
        .map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
}

pub fn save_network(path: &Path, net: &NetworkSpec) -> Result<()> {
    std::fs::write(path, network_to_bytes(net)?)?;
    Ok(())
}
