//! `SWAM` stream files: magic, u32 version, u32 d_x, d_y, n, then n records
//! of d_x + d_y little-endian f64 values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::StreamRecord;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SWAM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub d_x: usize,
    pub d_y: usize,
    pub n: usize,
}

pub fn encode_stream(d_x: usize, d_y: usize, records: &[StreamRecord]) -> Result<Vec<u8>> {
    let fits = |v: usize| u32::try_from(v).map_err(|_| Error::invalid(format!("{v} exceeds u32")));
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u32(fits(d_x)?);
    w.u32(fits(d_y)?);
    w.u32(fits(records.len())?);
    for r in records {
        if r.x.len() != d_x || r.y.len() != d_y {
            return Err(Error::DimensionMismatch {
                expected: d_x + d_y,
                got: r.x.len() + r.y.len(),
            });
        }
        w.f64s(&r.x);
        w.f64s(&r.y);
    }
    Ok(w.finish())
}

pub fn decode_stream(data: &[u8]) -> Result<(StreamHeader, Vec<StreamRecord>)> {
    let mut r = Reader::new(data);
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported stream version {version}")));
    }
    let header = StreamHeader {
        d_x: r.u32()? as usize,
        d_y: r.u32()? as usize,
        n: r.u32()? as usize,
    };
    let expected = (header.d_x + header.d_y) * header.n * 8;
    if r.remaining() != expected {
        return Err(Error::Corrupt(format!(
            "stream body has {} bytes, header implies {expected}",
            r.remaining()
        )));
    }
    let records = (1..=header.n as u64)
        .map(|t| {
            let x = r.f64s(header.d_x)?;
            let y = r.f64s(header.d_y)?;
            Ok(StreamRecord { t, x, y })
        })
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok((header, records))
}

pub fn write_stream(path: &Path, d_x: usize, d_y: usize, records: &[StreamRecord]) -> Result<()> {
    let bytes = encode_stream(d_x, d_y, records)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&bytes)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_stream(path: &Path) -> Result<(StreamHeader, Vec<StreamRecord>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut data)
        .map_err(|e| Error::io(path, e))?;
    decode_stream(&data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gen_uniform_random;

    #[test]
    fn round_trip() {
        let recs = gen_uniform_random(3, 2, 7, 1);
        let bytes = encode_stream(3, 2, &recs).unwrap();
        assert_eq!(&bytes[..4], b"SWAM");
        assert_eq!(bytes.len(), 20 + 7 * 5 * 8);
        let (h, back) = decode_stream(&bytes).unwrap();
        assert_eq!(h, StreamHeader { d_x: 3, d_y: 2, n: 7 });
        assert_eq!(back, recs);
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let bytes = encode_stream(3, 2, &gen_uniform_random(3, 2, 4, 1)).unwrap();
        assert!(decode_stream(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[1] = b'?';
        assert!(decode_stream(&bad).is_err());
    }
}
