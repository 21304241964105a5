use nalgebra::DVector;

use crate::kernels::{qr_unchecked, DenseMatrix};

/// Residuals below this fraction of `max(1, ||x||)` are treated as lying in span(Q).
pub const DEGENERATE_RESIDUAL: f64 = 1e-12;

/// Orthogonal column decomposition `buffer = q * r` with orthonormal `q`.
///
/// `r` is square but need not be upper triangular: rank-1 removals keep `q`
/// fixed and only rotate mass out of `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompState {
    q: DenseMatrix,
    r: DenseMatrix,
}

impl DecompState {
    pub fn empty(dim: usize) -> Self {
        Self {
            q: DenseMatrix::zeros(dim, 0),
            r: DenseMatrix::zeros(0, 0),
        }
    }

    pub fn from_matrix(a: &DenseMatrix) -> Self {
        let (q, r) = qr_unchecked(a);
        Self { q, r }
    }

    pub(crate) fn from_parts(q: DenseMatrix, r: DenseMatrix) -> Self {
        debug_assert_eq!(q.ncols(), r.nrows());
        Self { q, r }
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    pub(crate) fn r_mut(&mut self) -> &mut DenseMatrix {
        &mut self.r
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn cols(&self) -> usize {
        self.q.ncols()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        &self.q * &self.r
    }

    /// Append column `x` to the decomposed buffer.
    ///
    /// Gram-Schmidt with one reorthogonalization pass. A residual that
    /// vanishes gets a zero corner and a canonical basis vector outside
    /// span(q) as its new column, so `q` stays orthonormal.
    ///
    /// Panics if `q` already spans the whole space.
    pub fn inc_dec(&mut self, x: &[f64]) {
        let (d, k) = self.q.shape();
        assert_eq!(x.len(), d, "inc_dec dimension mismatch");
        assert!(k < d, "inc_dec on a full basis");
        let x = DVector::from_column_slice(x);

        let mut coeffs = self.q.tr_mul(&x);
        let mut residual = &x - &self.q * &coeffs;
        let again = self.q.tr_mul(&residual);
        residual -= &self.q * &again;
        coeffs += again;

        let res_norm = residual.norm();
        let (new_col, corner) = if res_norm < DEGENERATE_RESIDUAL * x.norm().max(1.0) {
            (self.outside_span(), 0.0)
        } else {
            (residual / res_norm, res_norm)
        };

        let q = std::mem::replace(&mut self.q, DenseMatrix::zeros(0, 0));
        let mut q = q.insert_column(k, 0.0);
        q.column_mut(k).copy_from(&new_col);
        self.q = q;

        let r = std::mem::replace(&mut self.r, DenseMatrix::zeros(0, 0));
        let mut r = r.insert_column(k, 0.0).insert_row(k, 0.0);
        r.view_mut((0, k), (k, 1)).copy_from(&coeffs);
        r[(k, k)] = corner;
        self.r = r;
    }

    /// Unit vector orthogonal to span(q), built from the canonical basis
    /// vector with the largest residual.
    fn outside_span(&self) -> DVector<f64> {
        let (d, k) = self.q.shape();
        let best = (0..d)
            .map(|i| {
                let proj: f64 = (0..k).map(|j| self.q[(i, j)].powi(2)).sum();
                (i, 1.0 - proj)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .expect("non-empty dimension");
        let mut e = DVector::zeros(d);
        e[best] = 1.0;
        for _ in 0..2 {
            let c = self.q.tr_mul(&e);
            e -= &self.q * c;
        }
        let n = e.norm();
        e / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{orthogonality_defect, RECON_TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_column() {
        let mut d = DecompState::empty(2);
        d.inc_dec(&[3.0, 4.0]);
        assert_eq!(d.q().as_slice(), &[0.6, 0.8]);
        assert_eq!(d.r().as_slice(), &[5.0]);
    }

    #[test]
    fn orthogonal_column_gives_block_diagonal() {
        let mut d = DecompState::empty(3);
        d.inc_dec(&[2.0, 0.0, 0.0]);
        d.inc_dec(&[0.0, 0.0, 3.0]);
        assert_eq!(d.r()[(0, 1)], 0.0);
        assert_eq!(d.r()[(1, 1)], 3.0);
    }

    #[test]
    fn in_span_column_pads_with_zero_corner() {
        let mut d = DecompState::empty(3);
        d.inc_dec(&[0.0, 1.0, 0.0]);
        d.inc_dec(&[0.0, 1.0, 0.0]);
        assert_eq!(d.r()[(1, 1)], 0.0);
        assert!(orthogonality_defect(d.q()) <= RECON_TOL);
        let buffer = DenseMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        assert!((d.reconstruct() - buffer).norm() <= 1e-8);
    }

    #[test]
    fn random_columns_stay_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut d = DecompState::empty(12);
        let mut buffer = DenseMatrix::zeros(12, 0);
        for k in 0..10 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            d.inc_dec(&x);
            buffer = buffer.insert_column(k, 0.0);
            buffer.column_mut(k).copy_from_slice(&x);
            assert!(orthogonality_defect(d.q()) <= RECON_TOL);
            assert!((d.reconstruct() - &buffer).norm() <= 1e-8);
        }
    }

    #[test]
    fn zero_column_is_degenerate() {
        let mut d = DecompState::empty(4);
        d.inc_dec(&[1.0, 0.0, 0.0, 0.0]);
        d.inc_dec(&[0.0; 4]);
        assert_eq!(d.cols(), 2);
        assert_eq!(d.r()[(1, 1)], 0.0);
        assert!(orthogonality_defect(d.q()) <= RECON_TOL);
    }
}
