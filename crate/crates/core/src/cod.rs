//! Co-occurring directions: a deterministic streaming sketch of `X Y^T`.
//!
//! Column pairs are buffered into `l` slots. When the buffer fills, both
//! buffers are orthogonalized, the small core `R_x R_y^T` is decomposed, and
//! every singular value is shrunk by the `ceil(l/2)`-th one, which frees at
//! least half of the slots.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernels::{
    self, qr_unchecked, shrink_singular_values, svd_unchecked, DenseMatrix, SvdResult,
};

/// Shrunk singular values at or below this fraction of the largest are treated as zero.
pub const NEGLIGIBLE_SIGMA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CodSketch {
    a: DenseMatrix,
    b: DenseMatrix,
    l: usize,
    fill: usize,
}

/// Outcome of one compression step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compression {
    pub delta: f64,
    pub retained: usize,
}

/// Orthogonal factors of the occupied buffers plus the SVD of their core.
#[derive(Debug, Clone)]
pub(crate) struct Factored {
    pub qx: DenseMatrix,
    pub qy: DenseMatrix,
    pub core: SvdResult,
}

impl CodSketch {
    pub fn new(d_x: usize, d_y: usize, l: usize) -> Result<Self> {
        if d_x == 0 || d_y == 0 {
            return Err(Error::invalid("dimensions must be positive"));
        }
        if l == 0 || l > d_x.min(d_y) {
            return Err(Error::invalid(format!(
                "sketch width {l} must lie in [1, min(d_x, d_y) = {}]",
                d_x.min(d_y)
            )));
        }
        Ok(Self {
            a: DenseMatrix::zeros(d_x, l),
            b: DenseMatrix::zeros(d_y, l),
            l,
            fill: 0,
        })
    }

    pub fn d_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn d_y(&self) -> usize {
        self.b.nrows()
    }

    pub fn width(&self) -> usize {
        self.l
    }

    pub fn fill(&self) -> usize {
        self.fill
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn occupied_a(&self) -> DenseMatrix {
        self.a.columns(0, self.fill).into_owned()
    }

    pub fn occupied_b(&self) -> DenseMatrix {
        self.b.columns(0, self.fill).into_owned()
    }

    /// Insert a column pair, compressing when the buffer becomes full.
    pub fn insert(&mut self, x: &[f64], y: &[f64]) -> Result<Option<Compression>> {
        self.check_pair(x, y)?;
        Ok(self.insert_unchecked(x, y))
    }

    pub(crate) fn check_pair(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.d_x() {
            return Err(Error::DimensionMismatch {
                expected: self.d_x(),
                got: x.len(),
            });
        }
        if y.len() != self.d_y() {
            return Err(Error::DimensionMismatch {
                expected: self.d_y(),
                got: y.len(),
            });
        }
        if !x.iter().chain(y).all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub(crate) fn insert_unchecked(&mut self, x: &[f64], y: &[f64]) -> Option<Compression> {
        debug_assert!(self.fill < self.l);
        self.a.column_mut(self.fill).copy_from_slice(x);
        self.b.column_mut(self.fill).copy_from_slice(y);
        self.fill += 1;
        (self.fill == self.l).then(|| self.compress())
    }

    /// Shrink the sketch by its `ceil(l/2)`-th singular value.
    pub fn compress(&mut self) -> Compression {
        if self.fill == 0 {
            return Compression {
                delta: 0.0,
                retained: 0,
            };
        }
        let f = self.factor();
        let (delta, shrunk) = shrink_singular_values(&f.core.sigma, self.l);
        let floor = NEGLIGIBLE_SIGMA * f.core.sigma.first().copied().unwrap_or(0.0);
        let retained = shrunk.iter().take_while(|&&s| s > floor).count();
        let root = DVector::from_iterator(retained, shrunk[..retained].iter().map(|s| s.sqrt()));

        let new_a = &f.qx * f.core.u.columns(0, retained) * DenseMatrix::from_diagonal(&root);
        let new_b = &f.qy * f.core.v.columns(0, retained) * DenseMatrix::from_diagonal(&root);
        self.set_occupied(&new_a, &new_b, retained);
        Compression { delta, retained }
    }

    /// Factor the occupied buffers: `A = Q_x R_x`, `B = Q_y R_y`, `svd(R_x R_y^T)`.
    pub(crate) fn factor(&self) -> Factored {
        let (qx, rx) = qr_unchecked(&self.occupied_a());
        let (qy, ry) = qr_unchecked(&self.occupied_b());
        debug_assert!(kernels::orthogonality_defect(&qx) <= kernels::RECON_TOL);
        debug_assert!(kernels::orthogonality_defect(&qy) <= kernels::RECON_TOL);
        let core = svd_unchecked(&(rx * ry.transpose()));
        Factored { qx, qy, core }
    }

    /// Overwrite the buffers with `cols` leading columns, zeroing the rest.
    pub(crate) fn set_occupied(&mut self, a: &DenseMatrix, b: &DenseMatrix, fill: usize) {
        debug_assert!(fill <= self.l);
        self.a.fill(0.0);
        self.b.fill(0.0);
        self.a.columns_mut(0, a.ncols()).copy_from(a);
        self.b.columns_mut(0, b.ncols()).copy_from(b);
        self.fill = fill;
    }

    pub(crate) fn a_occupied_mut(&mut self) -> nalgebra::DMatrixViewMut<'_, f64> {
        let fill = self.fill;
        self.a.columns_mut(0, fill)
    }

    pub(crate) fn b_occupied_mut(&mut self) -> nalgebra::DMatrixViewMut<'_, f64> {
        let fill = self.fill;
        self.b.columns_mut(0, fill)
    }

    pub(crate) fn from_parts(a: DenseMatrix, b: DenseMatrix, l: usize, fill: usize) -> Self {
        Self { a, b, l, fill }
    }

    /// `A B^T`.
    pub fn product(&self) -> DenseMatrix {
        self.a.columns(0, self.fill) * self.b.columns(0, self.fill).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{nuclear_norm, spectral_norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e1(d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        v
    }

    fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn rejects_bad_width_and_dims() {
        assert!(CodSketch::new(4, 3, 4).is_err());
        assert!(CodSketch::new(4, 3, 0).is_err());
        let mut s = CodSketch::new(4, 3, 2).unwrap();
        assert!(matches!(
            s.insert(&[1.0; 3], &[1.0; 3]),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn fresh_product_is_zero() {
        let s = CodSketch::new(3, 2, 2).unwrap();
        assert_eq!(s.product(), DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn single_insertion_is_outer_product() {
        let mut s = CodSketch::new(3, 2, 2).unwrap();
        s.insert(&[1.0, 2.0, 3.0], &[4.0, 5.0]).unwrap();
        let x = DenseMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = DenseMatrix::from_column_slice(2, 1, &[4.0, 5.0]);
        assert_eq!(s.product(), x * y.transpose());
    }

    #[test]
    fn buffer_regime_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = CodSketch::new(6, 5, 5).unwrap();
        let mut exact = DenseMatrix::zeros(6, 5);
        for _ in 0..4 {
            let x = random_vec(&mut rng, 6);
            let y = random_vec(&mut rng, 5);
            assert!(s.insert(&x, &y).unwrap().is_none());
            exact += DenseMatrix::from_column_slice(6, 1, &x) * DenseMatrix::from_row_slice(1, 5, &y);
        }
        assert!((s.product() - exact).norm() < 1e-12);
    }

    #[test]
    fn rank_one_stream_loses_nothing() {
        let mut s = CodSketch::new(4, 4, 4).unwrap();
        for _ in 0..7 {
            s.insert(&e1(4), &e1(4)).unwrap();
        }
        let mut expected = DenseMatrix::zeros(4, 4);
        expected[(0, 0)] = 7.0;
        assert!((s.product() - expected).norm() <= 1e-9);
    }

    #[test]
    fn compress_zero_sketch_is_noop() {
        let mut s = CodSketch::new(3, 3, 2).unwrap();
        let before = s.clone();
        s.compress();
        assert_eq!(s, before);
    }

    #[test]
    fn compress_rank_one_keeps_product() {
        let mut s = CodSketch::new(3, 3, 3).unwrap();
        s.insert(&[1.0, 1.0, 0.0], &[0.0, 2.0, 0.0]).unwrap();
        s.insert(&[2.0, 2.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        let before = s.product();
        let c = s.compress();
        assert!(c.delta <= 1e-12);
        assert!((s.product() - before).norm() <= 1e-12);
    }

    #[test]
    fn compress_removes_exactly_the_clipped_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = CodSketch::new(8, 7, 6).unwrap();
        for _ in 0..5 {
            s.insert(&random_vec(&mut rng, 8), &random_vec(&mut rng, 7)).unwrap();
        }
        let before = s.product();
        let sigma = kernels::svd(&before).unwrap().sigma;
        let c = s.compress();
        let after = s.product();
        let clipped: f64 = sigma.iter().map(|v| v.min(c.delta)).sum();
        let drop = nuclear_norm(&before).unwrap() - nuclear_norm(&after).unwrap();
        assert!((drop - clipped).abs() <= 1e-9 * (1.0 + clipped), "{drop} vs {clipped}");
        // zero-fill invariant
        for j in s.fill()..s.width() {
            assert!(s.a().column(j).iter().all(|&v| v == 0.0));
            assert!(s.b().column(j).iter().all(|&v| v == 0.0));
        }
        assert!(s.fill() < s.width().div_ceil(2));
    }

    #[test]
    fn error_bound_on_random_unit_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (dx, dy, l) = (20, 15, 10);
        let mut s = CodSketch::new(dx, dy, l).unwrap();
        let mut exact = DenseMatrix::zeros(dx, dy);
        for n in 1..=100 {
            let mut x = random_vec(&mut rng, dx);
            let mut y = random_vec(&mut rng, dy);
            let (nx, ny) = (kernels::l2(&x), kernels::l2(&y));
            x.iter_mut().for_each(|v| *v /= nx);
            y.iter_mut().for_each(|v| *v /= ny);
            s.insert(&x, &y).unwrap();
            exact += DenseMatrix::from_column_slice(dx, 1, &x) * DenseMatrix::from_row_slice(1, dy, &y);
            let err = spectral_norm(&(&exact - s.product())).unwrap();
            assert!(err <= 2.0 * n as f64 / l as f64 + 1e-9);
        }
    }
}
