//! Little-endian blob writer/reader for checkpoints and stream files.

use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;

#[derive(Debug, Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.buf.reserve(vs.len() * 8);
        for &v in vs {
            self.f64(v);
        }
    }

    /// Shape then column-major values.
    pub fn matrix(&mut self, m: &DenseMatrix) {
        self.usize(m.nrows());
        self.usize(m.ncols());
        self.f64s(m.as_slice());
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::Corrupt(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Corrupt(format!("length {v} overflows usize")))
    }

    /// A length that must not exceed `max`.
    pub fn bounded(&mut self, max: usize, what: &str) -> Result<usize> {
        let v = self.usize()?;
        if v > max {
            return Err(Error::Corrupt(format!("{what} = {v} exceeds {max}")));
        }
        Ok(v)
    }

    pub fn bool(&mut self) -> Result<bool> {
        match self.u64()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Corrupt(format!("invalid flag {v}"))),
        }
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn finite(&mut self) -> Result<f64> {
        let v = self.f64()?;
        if !v.is_finite() {
            return Err(Error::Corrupt("non-finite value".into()));
        }
        Ok(v)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Corrupt("length overflow".into()))?)?;
        let out: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Corrupt("non-finite value".into()));
        }
        Ok(out)
    }

    pub fn matrix(&mut self, rows: usize, max_cols: usize) -> Result<DenseMatrix> {
        let r = self.usize()?;
        if r != rows {
            return Err(Error::Corrupt(format!("matrix has {r} rows, expected {rows}")));
        }
        let c = self.bounded(max_cols, "matrix columns")?;
        let vals = self.f64s(r * c)?;
        Ok(DenseMatrix::from_vec(r, c, vals))
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Corrupt(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}
