//! Binary container for named column-major f64 matrices.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes
//! version      u32
//! fingerprint  u32 length + UTF-8 bytes
//! checksum     32 bytes, SHA-256 of the payload
//! payload:
//!   n_ints     u32, then per entry: u32 name length, name, u64 value
//!   n_mats     u32, then per entry: u32 name length, name, u64 rows, u64 cols,
//!              rows·cols f64 in column-major order
//! ```

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::linalg::DenseMatrix;
use crate::{Error, Result};

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub magic: [u8; 8],
    pub fingerprint: String,
    pub ints: Vec<(String, u64)>,
    pub matrices: Vec<(String, DenseMatrix)>,
}

fn put_name(buf: &mut Vec<u8>, name: &str) {
    buf.extend((name.len() as u32).to_le_bytes());
    buf.extend(name.as_bytes());
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Format("archive truncated".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn name(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("name is not UTF-8".into()))
    }
}

impl Archive {
    pub fn new(magic: [u8; 8], fingerprint: impl Into<String>) -> Self {
        Self { magic, fingerprint: fingerprint.into(), ints: Vec::new(), matrices: Vec::new() }
    }

    pub fn push_int(&mut self, name: &str, v: u64) {
        self.ints.push((name.to_string(), v));
    }

    pub fn push_matrix(&mut self, name: &str, m: DenseMatrix) {
        self.matrices.push((name.to_string(), m));
    }

    pub fn push_vector(&mut self, name: &str, v: &[f64]) {
        self.push_matrix(name, DenseMatrix::from_columns(v.len(), &[v.to_vec()]));
    }

    pub fn int(&self, name: &str) -> Result<u64> {
        self.ints
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
            .ok_or_else(|| Error::Format(format!("archive entry '{name}' missing")))
    }

    pub fn matrix(&self, name: &str) -> Result<&DenseMatrix> {
        self.matrices
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Format(format!("archive entry '{name}' missing")))
    }

    pub fn vector(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.matrix(name)?.as_col_major().to_vec())
    }

    fn payload(&self) -> Vec<u8> {
        let mut p = Vec::new();
        p.extend((self.ints.len() as u32).to_le_bytes());
        for (n, v) in &self.ints {
            put_name(&mut p, n);
            p.extend(v.to_le_bytes());
        }
        p.extend((self.matrices.len() as u32).to_le_bytes());
        for (n, m) in &self.matrices {
            put_name(&mut p, n);
            p.extend((m.nrows() as u64).to_le_bytes());
            p.extend((m.ncols() as u64).to_le_bytes());
            for v in m.as_col_major() {
                p.extend(v.to_le_bytes());
            }
        }
        p
    }

    /// SHA-256 of the payload, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.payload()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut out = Vec::with_capacity(payload.len() + 64);
        out.extend(self.magic);
        out.extend(VERSION.to_le_bytes());
        put_name(&mut out, &self.fingerprint);
        out.extend(Sha256::digest(&payload));
        out.extend(payload);
        out
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn from_bytes(data: &[u8], magic: [u8; 8]) -> Result<Self> {
        let mut c = Cursor { data, pos: 0 };
        if c.take(8)? != magic {
            return Err(Error::Format("wrong file magic".into()));
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported archive version {version}")));
        }
        let fingerprint = c.name()?;
        let sum = c.take(32)?.to_vec();
        let payload_start = c.pos;
        if Sha256::digest(&data[payload_start..]).as_slice() != sum.as_slice() {
            return Err(Error::Format("archive checksum mismatch".into()));
        }
        let mut a = Self::new(magic, fingerprint);
        for _ in 0..c.u32()? {
            let n = c.name()?;
            let v = c.u64()?;
            a.ints.push((n, v));
        }
        for _ in 0..c.u32()? {
            let n = c.name()?;
            let rows = c.u64()? as usize;
            let cols = c.u64()? as usize;
            let bytes = c.take(rows.checked_mul(cols).and_then(|k| k.checked_mul(8)).ok_or_else(|| Error::Format("matrix too large".into()))?)?;
            let data = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
            a.matrices.push((n, DenseMatrix::from_col_major(rows, cols, data)?));
        }
        if c.pos != data.len() {
            return Err(Error::Format("trailing bytes after archive payload".into()));
        }
        Ok(a)
    }

    pub fn read<R: Read>(mut r: R, magic: [u8; 8]) -> Result<Self> {
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        Self::from_bytes(&data, magic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless_and_tamper_evident() {
        let mut a = Archive::new(*b"TESTARCH", "abc");
        a.push_int("n", 7);
        a.push_matrix("m", DenseMatrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0)));
        a.push_vector("v", &[1.0, f64::MIN_POSITIVE, -0.0]);
        let bytes = a.to_bytes();
        let b = Archive::from_bytes(&bytes, *b"TESTARCH").unwrap();
        assert_eq!(a, b);
        assert_eq!(b.to_bytes(), bytes);
        let mut bad = bytes.clone();
        let last = bad.len() - 1;
        bad[last] ^= 1;
        assert!(Archive::from_bytes(&bad, *b"TESTARCH").is_err());
        assert!(Archive::from_bytes(&bytes, *b"OTHERARC").is_err());
    }
}
