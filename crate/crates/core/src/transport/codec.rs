//! Payload encoding: little-endian integers and 64-bit floats, every
//! multi-value field prefixed by its element count as a `u64`.

use thiserror::Error;

use crate::vec3::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("payload truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bytes: usize) -> Self {
        Encoder {
            buf: Vec::with_capacity(bytes),
        }
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn vec3(&mut self, v: Vec3) -> &mut Self {
        for c in v {
            self.f64(c);
        }
        self
    }

    pub fn vec3s(&mut self, vs: &[Vec3]) -> &mut Self {
        self.u64(vs.len() as u64);
        self.buf.reserve(vs.len() * 24);
        for v in vs {
            self.vec3(*v);
        }
        self
    }

    pub fn u64s(&mut self, vs: &[u64]) -> &mut Self {
        self.u64(vs.len() as u64);
        self.buf.reserve(vs.len() * 8);
        for &v in vs {
            self.u64(v);
        }
        self
    }

    pub fn usizes(&mut self, vs: &[usize]) -> &mut Self {
        self.u64(vs.len() as u64);
        self.buf.reserve(vs.len() * 8);
        for &v in vs {
            self.u64(v as u64);
        }
        self
    }

    pub fn u32s(&mut self, vs: &[u32]) -> &mut Self {
        self.u64(vs.len() as u64);
        self.buf.reserve(vs.len() * 4);
        for &v in vs {
            self.u32(v);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() - self.pos < n {
            return Err(CodecError::Truncated {
                offset: self.pos,
                needed: n - (self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn vec3(&mut self) -> Result<Vec3, CodecError> {
        Ok([self.f64()?, self.f64()?, self.f64()?])
    }

    fn count(&mut self, elem_bytes: usize) -> Result<usize, CodecError> {
        let n = self.u64()? as usize;
        let remaining = self.buf.len() - self.pos;
        if n.checked_mul(elem_bytes).map_or(true, |b| b > remaining) {
            return Err(CodecError::Truncated {
                offset: self.pos,
                needed: n.saturating_mul(elem_bytes).saturating_sub(remaining),
            });
        }
        Ok(n)
    }

    pub fn vec3s(&mut self) -> Result<Vec<Vec3>, CodecError> {
        let n = self.count(24)?;
        (0..n).map(|_| self.vec3()).collect()
    }

    pub fn u64s(&mut self) -> Result<Vec<u64>, CodecError> {
        let n = self.count(8)?;
        (0..n).map(|_| self.u64()).collect()
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>, CodecError> {
        let n = self.count(8)?;
        (0..n).map(|_| self.u64().map(|v| v as usize)).collect()
    }

    pub fn u32s(&mut self) -> Result<Vec<u32>, CodecError> {
        let n = self.count(4)?;
        (0..n).map(|_| self.u32()).collect()
    }

    /// Fails if bytes remain.
    pub fn finish(self) -> Result<(), CodecError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(CodecError::Trailing(n)),
        }
    }
}

/// Element types that can travel in replayed arrays.
pub trait WireItem: Copy + Send {
    fn encode_all(items: &[Self], enc: &mut Encoder);
    fn decode_all(dec: &mut Decoder<'_>) -> Result<Vec<Self>, CodecError>;
}

impl WireItem for Vec3 {
    fn encode_all(items: &[Self], enc: &mut Encoder) {
        enc.vec3s(items);
    }
    fn decode_all(dec: &mut Decoder<'_>) -> Result<Vec<Self>, CodecError> {
        dec.vec3s()
    }
}

impl WireItem for u64 {
    fn encode_all(items: &[Self], enc: &mut Encoder) {
        enc.u64s(items);
    }
    fn decode_all(dec: &mut Decoder<'_>) -> Result<Vec<Self>, CodecError> {
        dec.u64s()
    }
}

/// A value paired with its atom's global id.
impl WireItem for (Vec3, u64) {
    fn encode_all(items: &[Self], enc: &mut Encoder) {
        enc.u64(items.len() as u64);
        for &(v, id) in items {
            enc.vec3(v).u64(id);
        }
    }
    fn decode_all(dec: &mut Decoder<'_>) -> Result<Vec<Self>, CodecError> {
        let n = dec.count(32)?;
        (0..n).map(|_| Ok((dec.vec3()?, dec.u64()?))).collect()
    }
}
