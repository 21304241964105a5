use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::StreamRecord;
use crate::baselines::{samples_for, ExactWindowOracle, PrioritySampler};
use crate::error::{Error, Result};
use crate::kernels::{self, spectral_norm, DenseMatrix};
use crate::mlsocod::LayeredSketch;
use crate::socod::{sketch_width, SlidingSketch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub eps: f64,
    pub t: u64,
    pub rel_err: f64,
    pub max_sketch_cols: u64,
    pub update_ns: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record amortized update time; rows are no longer reproducible byte for byte.
    pub timing: bool,
}

#[derive(Debug)]
pub struct CellFailure {
    pub method: Method,
    pub eps: f64,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct Experiment {
    pub rows: Vec<MetricRow>,
    pub failures: Vec<CellFailure>,
}

/// Exact window product at one query time.
#[derive(Debug, Clone)]
pub struct QueryPoint {
    pub t: u64,
    pub product: DenseMatrix,
    /// `||X_W||_F * ||Y_W||_F`.
    pub scale: f64,
}

/// Query times `N, N + stride, ...` up to `n`.
pub fn query_times(n: usize, n_window: u64, stride: u64) -> Vec<u64> {
    (n_window..=n as u64).step_by(stride.max(1) as usize).collect()
}

/// Exact products for every query time.
pub fn reference(records: &[StreamRecord], n_window: u64, times: &[u64]) -> Result<Vec<QueryPoint>> {
    let first = records.first().ok_or(Error::EmptyWindow)?;
    let mut oracle = ExactWindowOracle::new(first.x.len(), first.y.len(), n_window)?;
    let mut out = Vec::with_capacity(times.len());
    let mut next = times.iter().peekable();
    for r in records {
        oracle.update(&r.x, &r.y)?;
        if next.peek() == Some(&&r.t) {
            next.next();
            let (fx, fy) = oracle.frobenius_norms();
            out.push(QueryPoint {
                t: r.t,
                product: oracle.product(),
                scale: fx * fy,
            });
        }
    }
    Ok(out)
}

/// Divide every `x` by the smallest `||x||` and every `y` by the smallest
/// `||y||`, so all squared norms are at least 1. Returns the rescaled stream
/// and the largest squared-norm ratio on either side.
///
/// A global rescaling leaves relative errors unchanged.
pub fn rescale_to_unit_floor(records: &[StreamRecord]) -> (Vec<StreamRecord>, f64) {
    let min_norm = |side: fn(&StreamRecord) -> &[f64]| {
        records
            .iter()
            .map(|r| kernels::l2(side(r)))
            .fold(f64::INFINITY, f64::min)
    };
    let mx = min_norm(|r| &r.x);
    let my = min_norm(|r| &r.y);
    let sx = if mx.is_finite() && mx > 0.0 { 1.0 / mx } else { 1.0 };
    let sy = if my.is_finite() && my > 0.0 { 1.0 / my } else { 1.0 };
    let mut ratio: f64 = 1.0;
    let scaled = records
        .iter()
        .map(|r| {
            let x: Vec<f64> = r.x.iter().map(|v| v * sx).collect();
            let y: Vec<f64> = r.y.iter().map(|v| v * sy).collect();
            ratio = ratio
                .max(x.iter().map(|v| v * v).sum())
                .max(y.iter().map(|v| v * v).sum());
            StreamRecord { t: r.t, x, y }
        })
        .collect();
    (scaled, ratio)
}

/// Any of the compared methods behind one interface.
#[derive(Debug, Clone)]
pub enum Sketcher {
    Socod(SlidingSketch),
    Mlsocod(LayeredSketch),
    Sampling(PrioritySampler),
    Oracle(ExactWindowOracle),
}

impl Sketcher {
    /// Method instance at error parameter `eps`. `r_bound` only affects the
    /// layered sketch and `seed` only the sampler.
    pub fn build(
        method: Method,
        eps: f64,
        d_x: usize,
        d_y: usize,
        n_window: u64,
        r_bound: f64,
        seed: u64,
    ) -> Result<Self> {
        crate::socod::check_eps(eps)?;
        Ok(match method {
            Method::Socod => Sketcher::Socod(SlidingSketch::with_threshold(
                d_x,
                d_y,
                sketch_width(eps, d_x, d_y),
                n_window,
                eps * n_window as f64,
            )?),
            Method::Mlsocod => {
                Sketcher::Mlsocod(LayeredSketch::new(d_x, d_y, eps, n_window, r_bound)?)
            }
            Method::Sampling => {
                Sketcher::Sampling(PrioritySampler::new(d_x, d_y, samples_for(eps), n_window, seed)?)
            }
            Method::Oracle => Sketcher::Oracle(ExactWindowOracle::new(d_x, d_y, n_window)?),
        })
    }

    pub fn update(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        match self {
            Sketcher::Socod(s) => s.fast_update(x, y),
            Sketcher::Mlsocod(s) => s.update(x, y),
            Sketcher::Sampling(s) => s.update(x, y),
            Sketcher::Oracle(s) => s.update(x, y),
        }
    }

    pub fn product(&self) -> Result<DenseMatrix> {
        Ok(match self {
            Sketcher::Socod(s) => s.query().product(),
            Sketcher::Mlsocod(s) => s.query().query.product(),
            Sketcher::Sampling(s) => {
                let (a, b) = s.estimate()?;
                a * b.transpose()
            }
            Sketcher::Oracle(s) => s.product(),
        })
    }

    pub fn held_columns(&self) -> usize {
        match self {
            Sketcher::Socod(s) => s.held_columns(),
            Sketcher::Mlsocod(s) => s.held_columns(),
            Sketcher::Sampling(s) => s.held_columns(),
            Sketcher::Oracle(s) => s.len(),
        }
    }
}

/// `||exact - approx||_2 / scale`, zero for an exactly matched empty window.
pub fn relative_error(point: &QueryPoint, approx: &DenseMatrix) -> Result<f64> {
    let err = spectral_norm(&(&point.product - approx))?;
    Ok(if point.scale > 0.0 { err / point.scale } else { err })
}

/// Stream `records` through `sketcher`, producing one row per query point.
pub fn drive(
    sketcher: &mut Sketcher,
    label: &str,
    eps: f64,
    records: &[StreamRecord],
    points: &[QueryPoint],
    opts: RunOptions,
) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::with_capacity(points.len());
    let mut next = points.iter().peekable();
    let mut peak = 0usize;
    let mut spent_ns = 0u128;
    for r in records {
        if opts.timing {
            let start = Instant::now();
            sketcher.update(&r.x, &r.y)?;
            spent_ns += start.elapsed().as_nanos();
        } else {
            sketcher.update(&r.x, &r.y)?;
        }
        peak = peak.max(sketcher.held_columns());
        if let Some(point) = next.next_if(|p| p.t == r.t) {
            let rel_err = relative_error(point, &sketcher.product()?)?;
            rows.push(MetricRow {
                method: label.to_string(),
                eps,
                t: r.t,
                rel_err,
                max_sketch_cols: peak as u64,
                update_ns: if opts.timing {
                    (spent_ns / r.t as u128) as u64
                } else {
                    0
                },
            });
        }
    }
    Ok(rows)
}

pub fn sort_rows(rows: &mut [MetricRow]) {
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.eps.total_cmp(&b.eps))
            .then(a.t.cmp(&b.t))
    });
}

/// Run every (method, eps) cell of `cfg` over `records` in parallel.
///
/// Cells that fail are reported in [`Experiment::failures`]; rows from the
/// others are kept.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    records: &[StreamRecord],
    opts: RunOptions,
) -> Result<Experiment> {
    cfg.validate()?;
    if records.len() < cfg.n_window as usize {
        return Err(Error::Config(format!(
            "stream has {} records, window needs {}",
            records.len(),
            cfg.n_window
        )));
    }
    if let Some(r) = records.iter().find(|r| r.x.len() != cfg.d_x || r.y.len() != cfg.d_y) {
        return Err(Error::Config(format!(
            "record {} has shape ({}, {}), config says ({}, {})",
            r.t,
            r.x.len(),
            r.y.len(),
            cfg.d_x,
            cfg.d_y
        )));
    }
    let (scaled, ratio) = rescale_to_unit_floor(records);
    let r_bound = cfg.r_bound.max(ratio);
    let times = query_times(scaled.len(), cfg.n_window, cfg.stride());
    let points = reference(&scaled, cfg.n_window, &times)?;

    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let cells: Vec<(Method, f64)> = methods
        .iter()
        .flat_map(|&m| cfg.eps_grid.iter().map(move |&e| (m, e)))
        .collect();
    let results: Vec<(Method, f64, Result<Vec<MetricRow>>)> = cells
        .par_iter()
        .map(|&(method, eps)| {
            let res = Sketcher::build(method, eps, cfg.d_x, cfg.d_y, cfg.n_window, r_bound, cfg.seed)
                .and_then(|mut s| drive(&mut s, method.name(), eps, &scaled, &points, opts));
            (method, eps, res)
        })
        .collect();

    let mut out = Experiment::default();
    for (method, eps, res) in results {
        match res {
            Ok(rows) => out.rows.extend(rows),
            Err(error) => out.failures.push(CellFailure { method, eps, error }),
        }
    }
    sort_rows(&mut out.rows);
    Ok(out)
}
