//! Canonical byte encoding shared by the wire format, disk format, and all
//! hashing.
//!
//! The format is deliberately small and injective:
//!
//! * unsigned integers are 8-byte big-endian,
//! * fixed-size byte arrays are written raw,
//! * variable-length byte strings carry a 4-byte big-endian length prefix,
//! * lists carry a 4-byte big-endian element count,
//! * optional values carry a 1-byte presence flag (`0`/`1`),
//! * enums carry a 1-byte tag followed by the variant payload,
//! * struct fields are written in declaration order.
//!
//! Decoding is strict: unknown tags, truncated input, and trailing bytes are
//! all errors, and a round-trip through `encode`/`decode` reproduces the
//! value exactly.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("unexpected end of input (needed {needed} more bytes)")]
    UnexpectedEnd { needed: usize },
    #[error("trailing bytes after decoded value ({0} left)")]
    TrailingBytes(usize),
    #[error("invalid tag byte {tag} for {what}")]
    InvalidTag { what: &'static str, tag: u8 },
    #[error("length {0} exceeds u32 range")]
    LengthOverflow(usize),
    #[error("declared length {declared} exceeds remaining input {remaining}")]
    BadLength { declared: usize, remaining: usize },
}

pub trait Encode {
    fn encode_into(&self, out: &mut Vec<u8>);

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }
}

pub trait Decode: Sized {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError>;

    /// Decodes a value from `bytes`, requiring the input to be fully consumed.
    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let value = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(value)
    }
}

/// Cursor over an input slice used by `Decode` implementations.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::UnexpectedEnd {
                needed: n - self.remaining(),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32_be(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64_be(&mut self) -> Result<u64, CodecError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_be_bytes(a))
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let b = self.take(N)?;
        let mut a = [0u8; N];
        a.copy_from_slice(b);
        Ok(a)
    }

    /// Reads a 4-byte count prefix, validating it against the remaining input
    /// so hostile lengths cannot trigger huge allocations.
    pub fn count(&mut self, min_element_size: usize) -> Result<usize, CodecError> {
        let declared = self.u32_be()? as usize;
        let floor = declared.saturating_mul(min_element_size.max(1));
        if floor > self.remaining() {
            return Err(CodecError::BadLength {
                declared,
                remaining: self.remaining(),
            });
        }
        Ok(declared)
    }

    pub fn var_bytes(&mut self) -> Result<Vec<u8>, CodecError> {
        let len = self.count(1)?;
        Ok(self.take(len)?.to_vec())
    }

    pub fn finish(&self) -> Result<(), CodecError> {
        if self.remaining() != 0 {
            return Err(CodecError::TrailingBytes(self.remaining()));
        }
        Ok(())
    }
}

pub fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_count(out: &mut Vec<u8>, n: usize) {
    debug_assert!(n <= u32::MAX as usize, "count exceeds u32 range");
    out.extend_from_slice(&(n as u32).to_be_bytes());
}

pub fn put_var_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    put_count(out, bytes.len());
    out.extend_from_slice(bytes);
}

impl Encode for u64 {
    fn encode_into(&self, out: &mut Vec<u8>) {
        put_u64(out, *self);
    }
}

impl Decode for u64 {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.u64_be()
    }
}

impl<const N: usize> Encode for [u8; N] {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self);
    }
}

impl<const N: usize> Decode for [u8; N] {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        r.array::<N>()
    }
}

impl<T: Encode> Encode for Option<T> {
    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            None => out.push(0),
            Some(v) => {
                out.push(1);
                v.encode_into(out);
            }
        }
    }
}

impl<T: Decode> Decode for Option<T> {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.u8()? {
            0 => Ok(None),
            1 => Ok(Some(T::decode_from(r)?)),
            tag => Err(CodecError::InvalidTag {
                what: "option flag",
                tag,
            }),
        }
    }
}

impl<T: Encode> Encode for Vec<T> {
    fn encode_into(&self, out: &mut Vec<u8>) {
        put_count(out, self.len());
        for item in self {
            item.encode_into(out);
        }
    }
}

impl<T: Decode> Decode for Vec<T> {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        let n = r.count(1)?;
        let mut items = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            items.push(T::decode_from(r)?);
        }
        Ok(items)
    }
}
