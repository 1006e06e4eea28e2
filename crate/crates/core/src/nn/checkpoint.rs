//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SCBM"            magic
//! u32               format version (1)
//! u8                1 if a convolution stage follows, else 0
//! [u32 x 5]         channels, height, width, filters, kernel   (conv only)
//! u32               number of dense layers
//! per layer:        u32 inputs, u32 outputs, u8 activation (0 identity, 1 relu, 2 sigmoid)
//! f64 ...           every parameter in `Network::params` order
//! ```

use std::path::Path;

use super::activation::Activation;
use super::conv::{ConvShape, ConvStage};
use super::layer::DenseLayer;
use super::matrix::Matrix;
use super::network::Network;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"SCBM";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode<T: Scalar>(net: &Network<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    match net.conv() {
        Some(c) => {
            let s = c.shape();
            out.push(1);
            for v in [s.channels, s.height, s.width, s.filters, s.kernel] {
                out.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
        None => out.push(0),
    }
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for l in net.layers() {
        out.extend_from_slice(&(l.inputs() as u32).to_le_bytes());
        out.extend_from_slice(&(l.outputs() as u32).to_le_bytes());
        out.push(l.activation().code());
    }
    for tensor in net.params() {
        for &v in tensor {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                expected: end,
                actual: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn values<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("parameter count overflows".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Network<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic bytes)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let conv_shape = match r.u8()? {
        0 => None,
        1 => Some(ConvShape {
            channels: r.u32()?,
            height: r.u32()?,
            width: r.u32()?,
            filters: r.u32()?,
            kernel: r.u32()?,
        }),
        other => return Err(Error::Format(format!("bad convolution flag {other}"))),
    };
    let n_layers = r.u32()?;
    let mut dims = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let inputs = r.u32()?;
        let outputs = r.u32()?;
        let act = Activation::from_code(r.u8()?).ok_or_else(|| Error::Format("unknown activation code".into()))?;
        dims.push((inputs, outputs, act));
    }
    let conv = match conv_shape {
        Some(s) => {
            let k = s.channels * s.kernel * s.kernel;
            let w = Matrix::from_vec(k, s.filters, r.values(k * s.filters)?)?;
            let b = r.values(s.filters)?;
            Some(ConvStage::new(s, w, b)?)
        }
        None => None,
    };
    let mut layers = Vec::with_capacity(dims.len());
    for (inputs, outputs, act) in dims {
        let w = Matrix::from_vec(inputs, outputs, r.values(inputs * outputs)?)?;
        let b = r.values(outputs)?;
        layers.push(DenseLayer::new(w, b, act)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after parameters", bytes.len() - r.pos)));
    }
    Network::new(conv, layers)
}

pub fn save<T: Scalar>(net: &Network<T>, path: &Path) -> Result<()> {
    std::fs::write(path, encode(net)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: &Path) -> Result<Network<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
