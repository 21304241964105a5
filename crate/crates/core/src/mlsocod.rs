//! Layered sliding-window sketch for columns with squared norms in `[1, R]`.
//!
//! Layer `j` is a [`SlidingSketch`] with threshold `2^j * eps * N`. Columns
//! heavy enough for a layer skip its sketch and become snapshots directly.
//! Each layer keeps at most `6 / eps` snapshots, dropping the oldest first, so
//! low layers forget early parts of the window when the stream is heavy. A
//! query answers from the lowest layer that still covers the whole window.

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::kernels;
use crate::socod::{check_eps, registration_cut, sketch_width, SketchQuery, SlidingSketch};

/// Per-layer snapshot cap is this many times `1 / eps`.
pub const QUEUE_CAP_FACTOR: f64 = 6.0;

/// Relative slack on the `[1, R]` squared-norm range.
pub const RANGE_TOL: f64 = 1e-9;

const MAGIC: &[u8; 4] = b"MLSC";
const VERSION: u64 = 1;

/// `max(1, ceil(log2 R))`.
pub fn layer_count(r_bound: f64) -> usize {
    (r_bound.log2().ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredQuery {
    pub query: SketchQuery,
    /// Index of the answering layer.
    pub layer: usize,
    /// No layer covered the window; the highest layer answered anyway.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSketch {
    layers: Vec<SlidingSketch>,
    r_bound: f64,
    eps: f64,
    n_window: u64,
    now: u64,
}

impl LayeredSketch {
    pub fn new(d_x: usize, d_y: usize, eps: f64, n_window: u64, r_bound: f64) -> Result<Self> {
        check_eps(eps)?;
        if !(r_bound.is_finite() && r_bound >= 1.0) {
            return Err(Error::invalid(format!("R must be at least 1, got {r_bound}")));
        }
        if n_window == 0 {
            return Err(Error::invalid("window length must be positive"));
        }
        let l = sketch_width(eps, d_x, d_y);
        let base = eps * n_window as f64;
        let layers = (0..layer_count(r_bound))
            .map(|j| SlidingSketch::with_threshold(d_x, d_y, l, n_window, base * 2f64.powi(j as i32)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            r_bound,
            eps,
            n_window,
            now: 0,
        })
    }

    pub fn layers(&self) -> &[SlidingSketch] {
        &self.layers
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.layers.iter().map(SlidingSketch::theta).collect()
    }

    pub fn r_bound(&self) -> f64 {
        self.r_bound
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n_window(&self) -> u64 {
        self.n_window
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn queue_cap(&self) -> f64 {
        QUEUE_CAP_FACTOR / self.eps
    }

    pub fn held_columns(&self) -> usize {
        self.layers.iter().map(SlidingSketch::held_columns).sum()
    }

    fn check_input(&self, x: &[f64], y: &[f64]) -> Result<()> {
        let layer = &self.layers[0];
        for (v, d) in [(x, layer.d_x()), (y, layer.d_y())] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        if !x.iter().chain(y).all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for v in [x, y] {
            let sq: f64 = v.iter().map(|a| a * a).sum();
            if sq < 1.0 - RANGE_TOL || sq > self.r_bound * (1.0 + RANGE_TOL) {
                return Err(Error::NormOutOfRange {
                    sq_norm: sq,
                    r_bound: self.r_bound,
                });
            }
        }
        Ok(())
    }

    pub fn update(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        self.check_input(x, y)?;
        self.now += 1;
        let weight = kernels::l2(x) * kernels::l2(y);
        let cap = self.queue_cap();
        for layer in &mut self.layers {
            let t = layer.begin_step();
            layer.cap_queues(cap);
            if weight >= registration_cut(layer.theta()) {
                layer.register_direct(x, y, t);
            } else {
                layer.fast_insert(x, y, t, None);
            }
            layer.cap_queues(cap);
        }
        Ok(())
    }

    /// Which layers currently cover the full window.
    pub fn valid_layers(&self) -> Vec<bool> {
        self.layers.iter().map(SlidingSketch::covers_window).collect()
    }

    pub fn query(&self) -> LayeredQuery {
        let found = self.layers.iter().position(SlidingSketch::covers_window);
        let layer = found.unwrap_or(self.layers.len() - 1);
        LayeredQuery {
            query: self.layers[layer].query(),
            layer,
            fallback: found.is_none(),
        }
    }

    /// `MLSC` blob: magic, version, L, R, eps, N, now, then each layer's `SOCD` blob.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u64(VERSION);
        w.usize(self.layers.len());
        w.f64(self.r_bound);
        w.f64(self.eps);
        w.u64(self.n_window);
        w.u64(self.now);
        for layer in &self.layers {
            layer.write_into(&mut w);
        }
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        r.expect_magic(MAGIC)?;
        let version = r.u64()?;
        if version != VERSION {
            return Err(Error::Corrupt(format!("unsupported version {version}")));
        }
        let count = r.bounded(1024, "layer count")?;
        let r_bound = r.finite()?;
        let eps = r.finite()?;
        let n_window = r.u64()?;
        let now = r.u64()?;
        if count == 0 || count != layer_count(r_bound) || check_eps(eps).is_err() {
            return Err(Error::Corrupt("inconsistent layered header".into()));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let layer = SlidingSketch::read_from(&mut r)?;
            if layer.n_window() != n_window || layer.now() != now {
                return Err(Error::Corrupt("layer disagrees with header".into()));
            }
            if let Some(first) = layers.first() {
                let first: &SlidingSketch = first;
                if (layer.d_x(), layer.d_y(), layer.width()) != (first.d_x(), first.d_y(), first.width()) {
                    return Err(Error::Corrupt("layer shapes differ".into()));
                }
            }
            layers.push(layer);
        }
        r.finish()?;
        Ok(Self {
            layers,
            r_bound,
            eps,
            n_window,
            now,
        })
    }
}
