//! Little-endian cursor shared by the binary decoders.

use byteorder::{ByteOrder, LittleEndian};

use crate::error::{Error, Result};

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, what }
    }

    pub fn err(&self, reason: impl Into<String>) -> Error {
        Error::Format { what: self.what, reason: reason.into() }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.buf.len() {
            return Err(self.err(format!("truncated: need {n} bytes, have {}", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn magic(&mut self, magic: &[u8; 4], version: u16) -> Result<()> {
        if self.take(4)? != magic {
            return Err(self.err("bad magic"));
        }
        let v = self.u16()?;
        if v != version {
            return Err(self.err(format!("unsupported version {v}")));
        }
        Ok(())
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(LittleEndian::read_u16(self.take(2)?))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4)?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(LittleEndian::read_u64(self.take(8)?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let v = LittleEndian::read_f64(self.take(8)?);
        if !v.is_finite() {
            return Err(self.err("non-finite value"));
        }
        Ok(v)
    }

    /// Reads `count` finite values after checking they fit in the input.
    pub fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count.checked_mul(8).ok_or_else(|| self.err("length overflow"))?;
        let raw = self.take(bytes)?;
        let mut out = vec![0.0; count];
        LittleEndian::read_f64_into(raw, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(self.err("non-finite value"));
        }
        Ok(out)
    }

    pub fn finish(self) -> Result<()> {
        if !self.buf.is_empty() {
            return Err(self.err(format!("{} trailing bytes", self.buf.len())));
        }
        Ok(())
    }
}
