//! Length-prefixed binary encoding shared by every canonical format.
//!
//! All integers are big-endian. Variable-length byte strings carry a `u32`
//! length prefix. A [`Reader`] must be fully consumed by [`Reader::finish`],
//! so trailing bytes are a decode error rather than silently ignored.

use thiserror::Error;

/// Why a byte string failed to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeFault {
    Truncated,
    Corrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("malformed encoding")]
pub struct DecodeError {
    pub position: usize,
    pub fault: DecodeFault,
}

impl DecodeError {
    pub fn truncated(position: usize) -> Self {
        Self {
            position,
            fault: DecodeFault::Truncated,
        }
    }

    pub fn corrupt(position: usize) -> Self {
        Self {
            position,
            fault: DecodeFault::Corrupt,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_tag(tag: &[u8]) -> Self {
        let mut w = Self::new();
        w.put_bytes(tag);
        w
    }

    pub fn put_u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn put_u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn put_u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn put_u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn put_fixed(&mut self, v: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(v);
        self
    }

    /// `u32` length prefix followed by the bytes.
    pub fn put_bytes(&mut self, v: &[u8]) -> &mut Self {
        let len = u32::try_from(v.len()).expect("field longer than u32::MAX");
        self.put_u32(len);
        self.put_fixed(v)
    }

    pub fn put_str(&mut self, v: &str) -> &mut Self {
        self.put_bytes(v.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::truncated(self.buf.len()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn get_array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn get_u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_be_bytes(self.get_array()?))
    }

    pub fn get_u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.get_array()?))
    }

    pub fn get_u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.get_array()?))
    }

    pub fn get_bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.get_u32()? as usize;
        self.take(len)
    }

    pub fn get_string(&mut self) -> Result<String, DecodeError> {
        let at = self.pos;
        let raw = self.get_bytes()?;
        String::from_utf8(raw.to_vec()).map_err(|_| DecodeError::corrupt(at))
    }

    /// Reads a `u32` element count that cannot exceed what the remaining
    /// input could hold at `min_item_len` bytes per element.
    pub fn get_count(&mut self, min_item_len: usize) -> Result<usize, DecodeError> {
        let at = self.pos;
        let n = self.get_u32()? as usize;
        if n.saturating_mul(min_item_len.max(1)) > self.remaining() {
            return Err(DecodeError::truncated(at));
        }
        Ok(n)
    }

    pub fn expect_tag(&mut self, tag: &[u8]) -> Result<(), DecodeError> {
        let at = self.pos;
        if self.get_bytes()? != tag {
            return Err(DecodeError::corrupt(at));
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.remaining() != 0 {
            return Err(DecodeError::corrupt(self.pos));
        }
        Ok(())
    }
}
