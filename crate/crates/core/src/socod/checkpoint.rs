//! `SOCD` checkpoint blobs.
//!
//! Layout, all integers u64 and all reals f64, little-endian:
//! magic, version, d_x, d_y, l, n_window, theta, normalized, now,
//! then the primary and auxiliary tracks. A track is fill, the occupied
//! buffer columns, last_registered, snapshot count, each snapshot as
//! (s, t, u, v), and a flag followed by both decompositions when present.

use std::collections::VecDeque;

use super::{DecompState, SlidingSketch, Snapshot, SnapshotQueue, Track};
use crate::cod::CodSketch;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;

const MAGIC: &[u8; 4] = b"SOCD";
const VERSION: u64 = 1;

/// Upper bound on queue lengths accepted when decoding.
const MAX_QUEUE: usize = 1 << 32;

impl SlidingSketch {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.bytes(MAGIC);
        w.u64(VERSION);
        w.usize(self.d_x());
        w.usize(self.d_y());
        w.usize(self.l);
        w.u64(self.n_window);
        w.f64(self.theta);
        w.u64(self.normalized as u64);
        w.u64(self.now);
        write_track(w, &self.primary);
        write_track(w, &self.aux);
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        r.expect_magic(MAGIC)?;
        let version = r.u64()?;
        if version != VERSION {
            return Err(Error::Corrupt(format!("unsupported version {version}")));
        }
        let d_x = r.usize()?;
        let d_y = r.usize()?;
        let l = r.usize()?;
        let n_window = r.u64()?;
        let theta = r.finite()?;
        let normalized = r.bool()?;
        let now = r.u64()?;
        if n_window == 0 || theta <= 0.0 {
            return Err(Error::Corrupt("invalid window or threshold".into()));
        }
        let mut s = Self::build(d_x, d_y, l, n_window, theta, normalized)
            .map_err(|e| Error::Corrupt(e.to_string()))?;
        s.now = now;
        s.primary = read_track(r, d_x, d_y, l, now)?;
        s.aux = read_track(r, d_x, d_y, l, now)?;
        Ok(s)
    }
}

fn write_track(w: &mut Writer, track: &Track) {
    let fill = track.cod.fill();
    w.usize(fill);
    w.f64s(track.cod.a().columns(0, fill).into_owned().as_slice());
    w.f64s(track.cod.b().columns(0, fill).into_owned().as_slice());
    w.u64(track.queue.last_registered());
    w.usize(track.queue.len());
    for snap in track.queue.iter() {
        w.u64(snap.s);
        w.u64(snap.t);
        w.f64s(&snap.u);
        w.f64s(&snap.v);
    }
    match &track.decomp {
        Some((dx, dy)) => {
            w.u64(1);
            for d in [dx, dy] {
                w.matrix(d.q());
                w.matrix(d.r());
            }
        }
        None => w.u64(0),
    }
}

fn read_track(r: &mut Reader<'_>, d_x: usize, d_y: usize, l: usize, now: u64) -> Result<Track> {
    let fill = r.bounded(l, "fill")?;
    let mut a = DenseMatrix::zeros(d_x, l);
    let mut b = DenseMatrix::zeros(d_y, l);
    a.columns_mut(0, fill)
        .copy_from_slice(&r.f64s(d_x * fill)?);
    b.columns_mut(0, fill)
        .copy_from_slice(&r.f64s(d_y * fill)?);
    let cod = CodSketch::from_parts(a, b, l, fill);

    let last_registered = r.u64()?;
    let count = r.bounded(MAX_QUEUE, "queue length")?;
    let mut items = VecDeque::with_capacity(count.min(1024));
    let mut prev_t = 0;
    for _ in 0..count {
        let s = r.u64()?;
        let t = r.u64()?;
        if t < prev_t || t > now || s > t {
            return Err(Error::Corrupt("snapshot timestamps out of order".into()));
        }
        prev_t = t;
        let u = r.f64s(d_x)?;
        let v = r.f64s(d_y)?;
        items.push_back(Snapshot { u, v, s, t });
    }
    if last_registered < prev_t {
        return Err(Error::Corrupt("last registration precedes queue tail".into()));
    }
    let queue = SnapshotQueue::from_parts(items, last_registered);

    let decomp = if r.bool()? {
        let mut read = |dim: usize| -> Result<DecompState> {
            let q = r.matrix(dim, fill)?;
            let rm = r.matrix(q.ncols(), q.ncols())?;
            if q.ncols() != fill {
                return Err(Error::Corrupt("decomposition width differs from fill".into()));
            }
            Ok(DecompState::from_parts(q, rm))
        };
        let dx = read(d_x)?;
        let dy = read(d_y)?;
        Some((dx, dy))
    } else {
        None
    };
    Ok(Track { cod, queue, decomp })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SlidingSketch {
        let mut s = SlidingSketch::new(3, 2, 0.5, 4).unwrap();
        let xs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.6, 0.8, 0.0]];
        for (i, x) in xs.iter().cycle().take(9).enumerate() {
            let y = if i % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
            s.fast_update(x, &y).unwrap();
        }
        s
    }

    #[test]
    fn round_trip() {
        let s = sample();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..4], b"SOCD");
        let back = SlidingSketch::from_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_damage() {
        let bytes = sample().to_bytes();
        assert!(SlidingSketch::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(SlidingSketch::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(SlidingSketch::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(SlidingSketch::from_bytes(&long).is_err());
    }
}
