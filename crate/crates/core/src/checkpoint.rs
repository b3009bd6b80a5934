//! `ESNN` parameter checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic  b"ESNN"
//! u16    version (1)
//! u16    section count (2: encoder, decoder)
//! per section:
//!   u8   kind (0 encoder, 1 decoder)
//!   u8   layer count
//!   per layer:
//!     u16 out, u16 in, u8 kernel size, u8 flags (bit 0 bias, bit 1 neuron settings)
//!     [f64 alpha, f64 threshold, f64 surrogate width]   if flag bit 1
//!     f32 weights, out*in*k*k, in [out][in][ky][kx] order
//!     [f32 bias, out]                                   if flag bit 0
//! ```

use std::path::Path;

use crate::conv::Kernel;
use crate::error::{Error, Result};
use crate::recon::DecoderParams;
use crate::snn::{EncoderParams, LifConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ESNN";
pub const CHECKPOINT_VERSION: u16 = 1;

fn put_layer(buf: &mut Vec<u8>, k: &Kernel, lif: Option<&LifConfig>) {
    buf.extend((k.out_ch as u16).to_le_bytes());
    buf.extend((k.in_ch as u16).to_le_bytes());
    buf.push(k.size as u8);
    buf.push(k.bias.is_some() as u8 | (lif.is_some() as u8) << 1);
    if let Some(c) = lif {
        for v in [c.alpha, c.u_th, c.surrogate_width] {
            buf.extend(v.to_le_bytes());
        }
    }
    for w in k.weights.iter().chain(k.bias.iter().flatten()) {
        buf.extend((*w as f32).to_le_bytes());
    }
}

pub fn encode_checkpoint(enc: &EncoderParams, dec: &DecoderParams) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend(CHECKPOINT_MAGIC);
    buf.extend(CHECKPOINT_VERSION.to_le_bytes());
    buf.extend(2u16.to_le_bytes());
    buf.extend([0, 3]);
    for (k, c) in enc.layers.iter().zip(&enc.lif) {
        put_layer(&mut buf, k, Some(c));
    }
    buf.extend([1, 3]);
    for k in &dec.layers {
        put_layer(&mut buf, k, None);
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(format!("checkpoint: byte {}", self.pos), "truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(format!("checkpoint: byte {}", self.pos), msg)
    }

    fn layer(&mut self) -> Result<(Kernel, Option<LifConfig>)> {
        let out_ch = self.u16()? as usize;
        let in_ch = self.u16()? as usize;
        let size = self.u8()? as usize;
        let flags = self.u8()?;
        let lif = if flags & 2 != 0 {
            Some(LifConfig::new(self.f64()?, self.f64()?, self.f64()?)?)
        } else {
            None
        };
        let weights = self.f32s(out_ch * in_ch * size * size)?;
        let bias = if flags & 1 != 0 { Some(self.f32s(out_ch)?) } else { None };
        Ok((
            Kernel {
                out_ch,
                in_ch,
                size,
                weights,
                bias,
            },
            lif,
        ))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(EncoderParams, DecoderParams)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::parse("checkpoint: byte 0", "bad magic, expected ESNN"));
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    if r.u16()? != 2 {
        return Err(r.err("expected 2 sections"));
    }
    let mut enc = None;
    let mut dec = None;
    for _ in 0..2 {
        let kind = r.u8()?;
        let count = r.u8()?;
        if count != 3 {
            return Err(r.err(format!("section has {count} layers, expected 3")));
        }
        let layers = [r.layer()?, r.layer()?, r.layer()?];
        match kind {
            0 => {
                let lif = layers
                    .iter()
                    .map(|(_, c)| c.ok_or_else(|| r.err("encoder layer without neuron settings")))
                    .collect::<Result<Vec<_>>>()?;
                let p = EncoderParams {
                    layers: layers.map(|(k, _)| k),
                    lif: [lif[0], lif[1], lif[2]],
                };
                p.validate()?;
                enc = Some(p);
            }
            1 => {
                let p = DecoderParams {
                    layers: layers.map(|(k, _)| k),
                };
                p.validate()?;
                dec = Some(p);
            }
            other => return Err(r.err(format!("unknown section kind {other}"))),
        }
    }
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes"));
    }
    match (enc, dec) {
        (Some(e), Some(d)) => Ok((e, d)),
        _ => Err(Error::parse("checkpoint", "needs one encoder and one decoder section")),
    }
}

pub fn save_checkpoint(path: &Path, enc: &EncoderParams, dec: &DecoderParams) -> Result<()> {
    std::fs::write(path, encode_checkpoint(enc, dec)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(EncoderParams, DecoderParams)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Rounds every parameter to `f32`, the precision stored in checkpoints.
pub fn round_to_f32(enc: &mut EncoderParams, dec: &mut DecoderParams) {
    for k in enc.layers.iter_mut().chain(dec.layers.iter_mut()) {
        for t in k.tensors_mut() {
            t.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }
}
