//! Little-endian helpers shared by the dataset and checkpoint formats.

use fnv::FnvHasher;
use std::hash::Hasher;

use crate::error::{Error, Result};

/// 64-bit FNV-1a over `bytes`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

#[derive(Default)]
pub(crate) struct Out {
    pub buf: Vec<u8>,
}

impl Out {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u32).to_le_bytes());
    }

    pub fn f32s(&mut self, vals: &[f64]) {
        for v in vals {
            self.buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.bytes(s.as_bytes());
    }
}

pub(crate) struct In<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> In<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    pub fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Format(format!("{}: {msg}", self.what))
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.err("length overflow"))?)?;
        Ok(bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64).collect())
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| self.err("string is not UTF-8"))
    }

    pub fn magic(&mut self, magic: &[u8; 4], version: u32) -> Result<()> {
        if self.take(4).ok() != Some(&magic[..]) {
            return Err(self.err("bad magic"));
        }
        let v = self.u32()?;
        if v != version as usize {
            return Err(self.err(format!("unsupported version {v}")));
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(self.err(format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}

/// Rounds through f32, the storage precision of every file format.
pub(crate) fn f32_round(v: &mut [f64]) {
    for x in v {
        *x = *x as f32 as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
