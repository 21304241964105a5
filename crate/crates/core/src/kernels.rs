//! Dense linear-algebra primitives shared by every sketch.
//!
//! Matrices are column-major [`nalgebra::DMatrix`] values. The routines here
//! validate finiteness, handle the zero-width shapes that sketches routinely
//! produce, and fix the conventions the sketches depend on (thin factors,
//! singular values sorted non-increasing).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Column-major real matrix.
pub type DenseMatrix = DMatrix<f64>;

/// Orthogonality / reconstruction tolerance for QR-style factors.
pub const RECON_TOL: f64 = 1e-9;
/// Reconstruction tolerance for the singular value decomposition.
pub const SVD_TOL: f64 = 1e-8;
/// Relative stopping tolerance for power iteration.
pub const POWER_TOL: f64 = 1e-6;
/// Iteration cap for power iteration.
pub const POWER_MAX_ITERS: usize = 10_000;
/// Matrices whose smaller side is at most this use a full SVD for the spectral norm.
pub const SPECTRAL_SVD_CUTOFF: usize = 64;

const POWER_SEED: u64 = 0x5EED_0F_C0D;

#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left singular vectors, one per column.
    pub u: DenseMatrix,
    /// Singular values, non-increasing.
    pub sigma: Vec<f64>,
    /// Right singular vectors, one per column.
    pub v: DenseMatrix,
}

pub fn ensure_finite(a: &DenseMatrix) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Thin orthogonal decomposition `a = q * r`.
///
/// For `a` with `rows >= cols`, `q` is `rows x cols` with orthonormal columns
/// and `r` is `cols x cols` upper triangular. Wide inputs yield a square `q`
/// and a `rows x cols` `r`.
pub fn qr_decompose(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    ensure_finite(a)?;
    if a.nrows() == 0 {
        return Err(Error::invalid("qr_decompose needs at least one row"));
    }
    Ok(qr_unchecked(a))
}

pub(crate) fn qr_unchecked(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return (DenseMatrix::zeros(rows, 0), DenseMatrix::zeros(0, 0));
    }
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// Full thin SVD with singular values sorted non-increasing.
pub fn svd(a: &DenseMatrix) -> Result<SvdResult> {
    ensure_finite(a)?;
    Ok(svd_unchecked(a))
}

pub(crate) fn svd_unchecked(a: &DenseMatrix) -> SvdResult {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return SvdResult {
            u: DenseMatrix::zeros(rows, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(cols, 0),
        };
    }
    let m = to_faer(a);
    let decomposed = m.thin_svd().expect("SVD of a finite matrix converges");
    SvdResult {
        u: from_faer(decomposed.U()),
        sigma: decomposed.S().column_vector().iter().copied().collect(),
        v: from_faer(decomposed.V()),
    }
}

/// Singular values only, sorted non-increasing.
pub(crate) fn singular_values_unchecked(a: &DenseMatrix) -> Vec<f64> {
    if a.nrows().min(a.ncols()) == 0 {
        return Vec::new();
    }
    to_faer(a)
        .singular_values()
        .expect("SVD of a finite matrix converges")
}

// nalgebra's bidiagonal SVD loses accuracy on some small cores with one
// dominant value, so decompositions go through faer.
fn to_faer(a: &DenseMatrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Largest singular value.
///
/// Uses a full SVD when the smaller side is at most [`SPECTRAL_SVD_CUTOFF`],
/// otherwise [`power_iteration_norm`].
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    ensure_finite(a)?;
    if a.nrows().min(a.ncols()) <= SPECTRAL_SVD_CUTOFF {
        Ok(singular_values_unchecked(a).first().copied().unwrap_or(0.0))
    } else {
        Ok(power_iteration_unchecked(a))
    }
}

/// Power iteration on the Gram matrix of `a` from a fixed seeded start vector.
///
/// Stops once the estimate changes by less than [`POWER_TOL`] relative, or
/// after [`POWER_MAX_ITERS`] iterations.
pub fn power_iteration_norm(a: &DenseMatrix) -> Result<f64> {
    ensure_finite(a)?;
    Ok(power_iteration_unchecked(a))
}

fn power_iteration_unchecked(a: &DenseMatrix) -> f64 {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    // Iterate in the smaller dimension; both Gram matrices share their spectrum.
    let tall = rows >= cols;
    let dim = if tall { cols } else { rows };
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut x = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
    let norm = x.norm();
    if norm == 0.0 {
        return 0.0;
    }
    x /= norm;

    let mut estimate = 0.0_f64;
    for _ in 0..POWER_MAX_ITERS {
        let (img, next) = if tall {
            let ax = a * &x;
            let next = a.tr_mul(&ax);
            (ax, next)
        } else {
            let ax = a.tr_mul(&x);
            let next = a * &ax;
            (ax, next)
        };
        // Rayleigh quotient of the Gram matrix at unit x is |A x|^2.
        let current = img.norm();
        let next_norm = next.norm();
        if next_norm == 0.0 {
            return current;
        }
        let converged = (current - estimate).abs() <= POWER_TOL * current;
        estimate = current;
        if converged {
            break;
        }
        x = next / next_norm;
    }
    estimate
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.norm()
}

/// Nuclear norm (sum of singular values).
pub fn nuclear_norm(a: &DenseMatrix) -> Result<f64> {
    ensure_finite(a)?;
    Ok(singular_values_unchecked(a).iter().sum())
}

/// Index (1-based) of the shrinkage singular value for sketch width `l`.
pub fn shrink_index(l: usize) -> usize {
    // l = 2 would otherwise shrink by the top value and erase rank-1 sketches
    l.div_ceil(2).max(l.min(2))
}

/// Subtract the `ceil(l/2)`-th singular value from every value, clipping at zero.
///
/// Returns `(delta, shrunk)`; `delta` is zero when fewer than `ceil(l/2)`
/// values are supplied.
pub fn shrink_singular_values(sigma: &[f64], l: usize) -> (f64, Vec<f64>) {
    let idx = shrink_index(l);
    let delta = if idx == 0 {
        0.0
    } else {
        sigma.get(idx - 1).copied().unwrap_or(0.0)
    };
    let shrunk = sigma.iter().map(|s| (s - delta).max(0.0)).collect();
    (delta, shrunk)
}

/// `||q^T q - I||_F`.
pub fn orthogonality_defect(q: &DenseMatrix) -> f64 {
    let gram = q.tr_mul(q);
    let n = gram.nrows();
    (gram - DenseMatrix::identity(n, n)).norm()
}

/// Build a matrix from equal-length column slices.
pub fn from_columns(rows: usize, cols: &[&[f64]]) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        debug_assert_eq!(c.len(), rows);
        m.column_mut(j).copy_from_slice(c);
    }
    m
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
