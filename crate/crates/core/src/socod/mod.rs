//! Sliding-window co-occurring directions for unit-norm streams.
//!
//! Two COD sketches run side by side. The auxiliary one starts empty at every
//! window boundary and replaces the primary one at the next boundary, so the
//! primary sketch never summarizes data older than two windows. Whenever a
//! direction in either sketch reaches the threshold `theta` it is moved out
//! into a timestamped snapshot queue, where it expires exactly.

mod checkpoint;
mod decomp;
mod snapshot;

use nalgebra::DVector;

pub use decomp::{DecompState, DEGENERATE_RESIDUAL};
pub use snapshot::{Snapshot, SnapshotQueue};

use crate::cod::CodSketch;
use crate::error::{Error, Result};
use crate::kernels::{self, qr_unchecked, singular_values_unchecked, svd_unchecked, DenseMatrix};

/// Allowed deviation from unit norm in the normalized model.
pub const NORM_TOL: f64 = 1e-9;

/// Relative slack below `theta` at which a direction still registers.
///
/// Without it a value that lands on `theta` exactly (a single unit pair when
/// `eps * N = 1`) registers on one update path and not the other, depending
/// on rounding.
pub const THRESHOLD_RTOL: f64 = 1e-9;

/// Smallest weight that registers as a snapshot under threshold `theta`.
pub fn registration_cut(theta: f64) -> f64 {
    theta * (1.0 - THRESHOLD_RTOL)
}

/// Sketch width for error parameter `eps`: `min(ceil(1/eps), d_x, d_y)`.
pub fn sketch_width(eps: f64, d_x: usize, d_y: usize) -> usize {
    // absorb representation error so that e.g. eps = 0.1 gives 10
    let w = (1.0 / eps - 1e-9).ceil().max(1.0);
    let w = if w >= usize::MAX as f64 { usize::MAX } else { w as usize };
    w.min(d_x).min(d_y)
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// Sketch factors for the current window.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchQuery {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    /// Fewer than `n_window` items have arrived.
    pub partial: bool,
}

impl SketchQuery {
    pub fn product(&self) -> DenseMatrix {
        &self.a * self.b.transpose()
    }

    pub fn columns(&self) -> usize {
        self.a.ncols()
    }
}

/// One rank-1 removal performed by the fast path, reported to an observer.
#[derive(Debug, Clone)]
pub struct Extraction {
    /// Occupied buffers before the removal.
    pub a_before: DenseMatrix,
    pub b_before: DenseMatrix,
    pub a_after: DenseMatrix,
    pub b_after: DenseMatrix,
    pub q_x: DenseMatrix,
    pub q_y: DenseMatrix,
    pub snapshot: Snapshot,
    pub auxiliary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Track {
    pub cod: CodSketch,
    pub queue: SnapshotQueue,
    /// Decompositions of the occupied buffers; `None` when stale.
    pub decomp: Option<(DecompState, DecompState)>,
}

impl Track {
    fn new(d_x: usize, d_y: usize, l: usize, boundary: u64) -> Self {
        Self {
            cod: CodSketch::new(d_x, d_y, l).expect("width validated by caller"),
            queue: SnapshotQueue::new(boundary),
            decomp: None,
        }
    }

    fn columns(&self) -> usize {
        self.cod.fill() + self.queue.len()
    }

    /// Insert, then move every direction at or above `theta` into the queue.
    fn simple_step(&mut self, x: &[f64], y: &[f64], t: u64, theta: f64) {
        self.decomp = None;
        self.cod.insert_unchecked(x, y);
        let (qx, rx) = qr_unchecked(&self.cod.occupied_a());
        let (qy, ry) = qr_unchecked(&self.cod.occupied_b());
        let core = rx * ry.transpose();
        if singular_values_unchecked(&core).first().is_none_or(|&s| s < theta) {
            return;
        }
        let svd = svd_unchecked(&core);
        let k = svd.sigma.len();
        let m = svd.sigma.iter().take_while(|&&s| s >= theta).count();
        for i in 0..m {
            let root = svd.sigma[i].sqrt();
            let u = &qx * svd.u.column(i) * root;
            let v = &qy * svd.v.column(i) * root;
            self.queue.push(u.as_slice().to_vec(), v.as_slice().to_vec(), t);
        }
        // The extracted directions keep their slots, as in the fast path.
        let rest = DVector::from_iterator(k - m, svd.sigma[m..].iter().map(|s| s.sqrt()));
        let rest = DenseMatrix::from_diagonal(&rest);
        let new_a = &qx * svd.u.columns(m, k - m) * &rest;
        let new_b = &qy * svd.v.columns(m, k - m) * &rest;
        let fill = self.cod.fill();
        self.cod.set_occupied(&new_a, &new_b, fill);
    }

    fn refactor(&mut self) {
        self.decomp = Some((
            DecompState::from_matrix(&self.cod.occupied_a()),
            DecompState::from_matrix(&self.cod.occupied_b()),
        ));
    }

    /// Same contract as [`Track::simple_step`], maintained through incremental
    /// decompositions and rank-1 removals.
    fn fast_step(
        &mut self,
        x: &[f64],
        y: &[f64],
        t: u64,
        theta: f64,
        auxiliary: bool,
        mut observer: Option<&mut dyn FnMut(&Extraction)>,
    ) {
        if self.decomp.is_none() {
            self.refactor();
        }
        if self.cod.insert_unchecked(x, y).is_some() {
            self.refactor();
        } else {
            let (dx, dy) = self.decomp.as_mut().expect("refactored above");
            dx.inc_dec(x);
            dy.inc_dec(y);
        }

        let (dx, dy) = self.decomp.as_mut().expect("refactored above");
        let core = dx.r() * dy.r().transpose();
        if singular_values_unchecked(&core).first().is_none_or(|&s| s < theta) {
            return;
        }
        let svd = svd_unchecked(&core);
        for (i, &sigma) in svd.sigma.iter().enumerate() {
            if sigma < theta {
                break;
            }
            let ui = svd.u.column(i).into_owned();
            let vi = svd.v.column(i).into_owned();
            let qu = dx.q() * &ui;
            let qv = dy.q() * &vi;
            let urx = dx.r().tr_mul(&ui);
            let vry = dy.r().tr_mul(&vi);

            let before = observer
                .is_some()
                .then(|| (self.cod.occupied_a(), self.cod.occupied_b()));
            self.cod.a_occupied_mut().ger(-1.0, &qu, &urx, 1.0);
            self.cod.b_occupied_mut().ger(-1.0, &qv, &vry, 1.0);
            dx.r_mut().ger(-1.0, &ui, &urx, 1.0);
            dy.r_mut().ger(-1.0, &vi, &vry, 1.0);

            let root = sigma.sqrt();
            self.queue
                .push((qu * root).as_slice().to_vec(), (qv * root).as_slice().to_vec(), t);

            if let (Some(f), Some((a_before, b_before))) = (observer.as_mut(), before) {
                f(&Extraction {
                    a_before,
                    b_before,
                    a_after: self.cod.occupied_a(),
                    b_after: self.cod.occupied_b(),
                    q_x: dx.q().clone(),
                    q_y: dy.q().clone(),
                    snapshot: self.queue.iter().last().expect("just pushed").clone(),
                    auxiliary,
                });
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlidingSketch {
    primary: Track,
    aux: Track,
    n_window: u64,
    theta: f64,
    l: usize,
    normalized: bool,
    now: u64,
}

impl SlidingSketch {
    /// Normalized-model sketch: threshold `eps * n_window`, unit-norm inputs only.
    pub fn new(d_x: usize, d_y: usize, eps: f64, n_window: u64) -> Result<Self> {
        check_eps(eps)?;
        if n_window == 0 {
            return Err(Error::invalid("window length must be positive"));
        }
        let l = sketch_width(eps, d_x, d_y);
        Self::build(d_x, d_y, l, n_window, eps * n_window as f64, true)
    }

    /// Sketch with an explicit width and threshold that accepts columns of any norm.
    pub fn with_threshold(
        d_x: usize,
        d_y: usize,
        l: usize,
        n_window: u64,
        theta: f64,
    ) -> Result<Self> {
        if n_window == 0 {
            return Err(Error::invalid("window length must be positive"));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::invalid(format!("threshold must be positive, got {theta}")));
        }
        Self::build(d_x, d_y, l, n_window, theta, false)
    }

    fn build(
        d_x: usize,
        d_y: usize,
        l: usize,
        n_window: u64,
        theta: f64,
        normalized: bool,
    ) -> Result<Self> {
        // validates dims and width
        CodSketch::new(d_x, d_y, l)?;
        Ok(Self {
            primary: Track::new(d_x, d_y, l, 0),
            aux: Track::new(d_x, d_y, l, 0),
            n_window,
            theta,
            l,
            normalized,
            now: 0,
        })
    }

    pub fn d_x(&self) -> usize {
        self.primary.cod.d_x()
    }

    pub fn d_y(&self) -> usize {
        self.primary.cod.d_y()
    }

    pub fn width(&self) -> usize {
        self.l
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n_window(&self) -> u64 {
        self.n_window
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn primary_sketch(&self) -> &CodSketch {
        &self.primary.cod
    }

    pub fn aux_sketch(&self) -> &CodSketch {
        &self.aux.cod
    }

    pub fn primary_queue(&self) -> &SnapshotQueue {
        &self.primary.queue
    }

    pub fn aux_queue(&self) -> &SnapshotQueue {
        &self.aux.queue
    }

    /// Fast-path decompositions of the primary buffers, if current.
    pub fn primary_decomp(&self) -> Option<(&DecompState, &DecompState)> {
        self.primary.decomp.as_ref().map(|(x, y)| (x, y))
    }

    pub fn aux_decomp(&self) -> Option<(&DecompState, &DecompState)> {
        self.aux.decomp.as_ref().map(|(x, y)| (x, y))
    }

    /// Columns held across both sketches and both queues.
    pub fn held_columns(&self) -> usize {
        self.primary.columns() + self.aux.columns()
    }

    fn check_input(&self, x: &[f64], y: &[f64]) -> Result<()> {
        self.primary.cod.check_pair(x, y)?;
        if self.normalized {
            for v in [x, y] {
                let norm = kernels::l2(v);
                if (norm - 1.0).abs() > NORM_TOL {
                    return Err(Error::NotNormalized { norm });
                }
            }
        }
        Ok(())
    }

    /// Update by re-decomposing the buffers from scratch every step.
    pub fn update(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        self.check_input(x, y)?;
        let t = self.begin_step();
        let cut = registration_cut(self.theta);
        self.primary.simple_step(x, y, t, cut);
        self.aux.simple_step(x, y, t, cut);
        Ok(())
    }

    /// Update with incrementally maintained decompositions.
    pub fn fast_update(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        self.check_input(x, y)?;
        let t = self.begin_step();
        self.fast_insert(x, y, t, None);
        Ok(())
    }

    /// [`SlidingSketch::fast_update`], reporting every rank-1 removal to `observer`.
    pub fn fast_update_observed(
        &mut self,
        x: &[f64],
        y: &[f64],
        observer: &mut dyn FnMut(&Extraction),
    ) -> Result<()> {
        self.check_input(x, y)?;
        let t = self.begin_step();
        self.fast_insert(x, y, t, Some(observer));
        Ok(())
    }

    /// Advance the clock, refresh at window boundaries, and expire snapshots.
    pub(crate) fn begin_step(&mut self) -> u64 {
        self.now += 1;
        let t = self.now;
        if (t - 1) % self.n_window == 0 {
            let (d_x, d_y) = (self.d_x(), self.d_y());
            let fresh = Track::new(d_x, d_y, self.l, t - 1);
            self.primary = std::mem::replace(&mut self.aux, fresh);
        }
        self.primary.queue.expire(t, self.n_window);
        self.aux.queue.expire(t, self.n_window);
        t
    }

    pub(crate) fn fast_insert(
        &mut self,
        x: &[f64],
        y: &[f64],
        t: u64,
        mut observer: Option<&mut dyn FnMut(&Extraction)>,
    ) {
        let cut = registration_cut(self.theta);
        self.primary
            .fast_step(x, y, t, cut, false, observer.as_mut().map(|f| &mut **f as _));
        self.aux.fast_step(x, y, t, cut, true, observer);
    }

    /// Append `(x, y)` as a snapshot to both queues, bypassing the sketches.
    pub(crate) fn register_direct(&mut self, x: &[f64], y: &[f64], t: u64) {
        self.primary.queue.push(x.to_vec(), y.to_vec(), t);
        self.aux.queue.push(x.to_vec(), y.to_vec(), t);
    }

    /// Drop the oldest snapshots until each queue holds at most `cap`.
    pub(crate) fn cap_queues(&mut self, cap: f64) {
        for q in [&mut self.primary.queue, &mut self.aux.queue] {
            while q.len() as f64 > cap {
                q.pop_front();
            }
        }
    }

    /// The primary queue still accounts for everything registered in the window.
    pub fn covers_window(&self) -> bool {
        self.primary.queue.coverage_start() as i128 <= self.now as i128 - self.n_window as i128
            || self.primary.queue.coverage_start() == 0
    }

    /// Primary sketch columns followed by the live snapshot vectors.
    pub fn query(&self) -> SketchQuery {
        let fill = self.primary.cod.fill();
        let k = self.primary.queue.len();
        let mut a = DenseMatrix::zeros(self.d_x(), fill + k);
        let mut b = DenseMatrix::zeros(self.d_y(), fill + k);
        a.columns_mut(0, fill).copy_from(&self.primary.cod.a().columns(0, fill));
        b.columns_mut(0, fill).copy_from(&self.primary.cod.b().columns(0, fill));
        for (j, s) in self.primary.queue.iter().enumerate() {
            a.column_mut(fill + j).copy_from_slice(&s.u);
            b.column_mut(fill + j).copy_from_slice(&s.v);
        }
        SketchQuery {
            a,
            b,
            partial: self.now < self.n_window,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::spectral_norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = kernels::l2(&v);
        v.iter_mut().for_each(|x| *x /= n);
        v
    }

    fn e1(d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        v
    }

    #[test]
    fn init_formulas() {
        let s = SlidingSketch::new(100, 80, 0.25, 400).unwrap();
        assert_eq!((s.width(), s.theta()), (4, 100.0));
        let s = SlidingSketch::new(10, 8, 0.001, 400).unwrap();
        assert_eq!(s.width(), 8);
        let s = SlidingSketch::new(10, 8, 1.0, 37).unwrap();
        assert_eq!((s.width(), s.theta()), (1, 37.0));
        assert_eq!(sketch_width(0.1, 100, 100), 10);
        assert!(SlidingSketch::new(10, 8, 0.0, 5).is_err());
        assert!(SlidingSketch::new(10, 8, 1.5, 5).is_err());
        assert!(SlidingSketch::new(10, 8, 0.5, 0).is_err());
    }

    #[test]
    fn fresh_query_is_empty() {
        let s = SlidingSketch::new(5, 4, 0.5, 10).unwrap();
        let q = s.query();
        assert_eq!(q.columns(), 0);
        assert_eq!(q.product(), DenseMatrix::zeros(5, 4));
        assert!(q.partial);
    }

    #[test]
    fn rejects_non_unit_columns() {
        let mut s = SlidingSketch::new(3, 3, 0.5, 10).unwrap();
        assert!(matches!(
            s.update(&[2.0, 0.0, 0.0], &e1(3)),
            Err(Error::NotNormalized { .. })
        ));
        assert!(s.update(&[1.0, 0.0], &e1(3)).is_err());
        assert_eq!(s.now(), 0);
    }

    #[test]
    fn first_update_swaps_zero_structures() {
        let mut s = SlidingSketch::new(4, 4, 0.5, 8).unwrap();
        s.update(&e1(4), &e1(4)).unwrap();
        assert_eq!(s.now(), 1);
        let mut expected = DenseMatrix::zeros(4, 4);
        expected[(0, 0)] = 1.0;
        assert!((s.query().product() - expected).norm() < 1e-12);
    }

    #[test]
    fn identical_pairs_within_bound() {
        let (n, eps) = (40u64, 0.5);
        for fast in [false, true] {
            let mut s = SlidingSketch::new(4, 4, eps, n).unwrap();
            let mut registered = false;
            for _ in 0..3 * n {
                if fast {
                    s.fast_update(&e1(4), &e1(4)).unwrap();
                } else {
                    s.update(&e1(4), &e1(4)).unwrap();
                }
                let mut exact = DenseMatrix::zeros(4, 4);
                exact[(0, 0)] = s.now().min(n) as f64;
                let err = spectral_norm(&(exact - s.query().product())).unwrap();
                assert!(err <= 8.0 * eps * n as f64);
                registered |= !s.primary_queue().is_empty();
            }
            assert!(registered);
        }
    }

    #[test]
    fn one_snapshot_query_is_outer_product() {
        let mut s = SlidingSketch::with_threshold(3, 2, 2, 10, 1.0).unwrap();
        s.update(&[0.0, 3.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(s.primary_queue().len(), 1);
        assert_eq!(s.primary_sketch().product(), DenseMatrix::zeros(3, 2));
        let mut expected = DenseMatrix::zeros(3, 2);
        expected[(1, 0)] = 6.0;
        assert!((s.query().product() - expected).norm() < 1e-12);
    }

    #[test]
    fn below_threshold_leaves_sketch_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = SlidingSketch::new(6, 6, 0.25, 100).unwrap();
        for _ in 0..3 {
            let (x, y) = (unit(&mut rng, 6), unit(&mut rng, 6));
            s.fast_update(&x, &y).unwrap();
        }
        assert!(s.primary_queue().is_empty());
        assert_eq!(s.primary_sketch().fill(), 3);
    }

    #[test]
    fn fast_and_simple_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 30;
        let mut simple = SlidingSketch::new(8, 6, 0.25, n).unwrap();
        let mut fast = simple.clone();
        for _ in 0..5 * n {
            let (x, y) = (unit(&mut rng, 8), unit(&mut rng, 6));
            simple.update(&x, &y).unwrap();
            fast.fast_update(&x, &y).unwrap();
            let diff = simple.query().product() - fast.query().product();
            assert!(spectral_norm(&diff).unwrap() <= 1e-6);
            assert_eq!(simple.held_columns(), fast.held_columns());
        }
    }

    #[test]
    fn decompositions_stay_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = SlidingSketch::new(10, 9, 0.2, 25).unwrap();
        for _ in 0..200 {
            let (x, y) = (unit(&mut rng, 10), unit(&mut rng, 9));
            s.fast_update(&x, &y).unwrap();
            for (d, buf) in [
                (s.primary_decomp().unwrap().0, s.primary_sketch().occupied_a()),
                (s.primary_decomp().unwrap().1, s.primary_sketch().occupied_b()),
                (s.aux_decomp().unwrap().0, s.aux_sketch().occupied_a()),
            ] {
                assert!(kernels::orthogonality_defect(d.q()) <= kernels::RECON_TOL);
                assert!((d.reconstruct() - buf).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn snapshots_meet_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = SlidingSketch::new(6, 6, 0.25, 20).unwrap();
        let mut count = 0;
        for _ in 0..200 {
            // positive entries share a dominant direction
            let x: Vec<f64> = unit(&mut rng, 6).iter().map(|v| v.abs()).collect();
            let y = x.clone();
            s.fast_update_observed(&x, &y, &mut |e: &Extraction| {
                assert!(e.snapshot.weight() >= registration_cut(5.0));
                assert!(e.snapshot.s < e.snapshot.t);
                count += 1;
            })
            .unwrap();
        }
        assert!(count > 0);
    }
}
