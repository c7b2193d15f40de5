//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Relative factor in the numerical-rank threshold
/// `sigma_i > max(rows, cols) * sigma_max * RANK_RTOL`.
pub const RANK_RTOL: f64 = 1e-10;

/// Thin SVD `m = u diag(s) v^T` with `s` in non-increasing order.
#[derive(Clone, Debug)]
pub struct Svd<T: Real> {
    pub u: DMatrix<T>,
    pub s: Vec<T>,
    pub v: DMatrix<T>,
}

fn to_faer<T: Real>(m: &DMatrix<T>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].as_f64())
}

fn from_faer<T: Real>(m: faer::MatRef<'_, f64>) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| T::lit(m[(i, j)]))
}

/// Decompositions run in `f64` through faer: nalgebra's own SVD can return
/// factors that do not reproduce the input on ordinary, well-conditioned
/// matrices, which ruins the identification accuracy.
pub fn svd<T: Real>(m: &DMatrix<T>) -> Svd<T> {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Svd {
            u: DMatrix::zeros(m.nrows(), 0),
            s: Vec::new(),
            v: DMatrix::zeros(m.ncols(), 0),
        };
    }
    if !all_finite(m) {
        return Svd {
            u: DMatrix::zeros(m.nrows(), k),
            s: vec![T::lit(f64::NAN); k],
            v: DMatrix::zeros(m.ncols(), k),
        };
    }
    let dec = to_faer(m).thin_svd().expect("SVD of a finite matrix");
    let diag = dec.S().column_vector();
    Svd {
        u: from_faer(dec.U()),
        s: (0..k).map(|i| T::lit(diag[i])).collect(),
        v: from_faer(dec.V()),
    }
}

pub fn singular_values<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    svd(m).s
}

pub fn numerical_rank<T: Real>(m: &DMatrix<T>) -> usize {
    let s = singular_values(m);
    let Some(&smax) = s.first() else {
        return 0;
    };
    let dim = m.nrows().max(m.ncols());
    let thresh = T::lit(dim as f64 * RANK_RTOL) * smax;
    s.iter().filter(|&&x| x > thresh).count()
}

/// 2-norm condition number; infinite for singular or non-finite input.
pub fn condition_number<T: Real>(m: &DMatrix<T>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() && hi.as_f64().is_finite() => (hi / lo).as_f64(),
        _ => f64::INFINITY,
    }
}

pub fn spectral_radius<T: Real>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    if !all_finite(m) {
        return T::lit(f64::NAN);
    }
    let eig = to_faer(m).eigenvalues().expect("eigenvalues of a finite matrix");
    T::lit(eig.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max))
}

pub fn frobenius<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn block<T: Real>(m: &DMatrix<T>, br: usize, bc: usize, rows: usize, cols: usize) -> DMatrix<T> {
    m.view((br * rows, bc * cols), (rows, cols)).into_owned()
}

pub fn set_block<T: Real>(
    m: &mut DMatrix<T>,
    br: usize,
    bc: usize,
    value: &DMatrix<T>,
) {
    let (rows, cols) = value.shape();
    m.view_mut((br * rows, bc * cols), (rows, cols)).copy_from(value);
}

pub fn block_diag<T: Real>(blocks: &[DMatrix<T>]) -> DMatrix<T> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values below `rcond * sigma_max`.
pub fn lstsq<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, rcond: f64) -> DMatrix<T> {
    if a.nrows() > 4 * a.ncols() {
        // long regressor matrices: shrink to the triangular factor first
        let (q, r) = a.clone().qr().unpack();
        return lstsq(&r, &(q.transpose() * b), rcond);
    }
    let Svd { u, s, v } = svd(a);
    let Some(&smax) = s.first() else {
        return DMatrix::zeros(a.ncols(), b.ncols());
    };
    let eps = T::lit(rcond) * smax;
    let mut utb = u.transpose() * b;
    for (i, mut row) in utb.row_iter_mut().enumerate() {
        if s[i] > eps {
            row /= s[i];
        } else {
            row.fill(T::zero());
        }
    }
    v * utb
}

pub fn all_finite<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().all(|x| x.as_f64().is_finite())
}

pub fn vector_all_finite<T: Real>(v: &DVector<T>) -> bool {
    v.iter().all(|x| x.as_f64().is_finite())
}

pub(crate) fn from_rows_f64<T: Real>(rows: &[&[f64]]) -> DMatrix<T> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(nrows, ncols, |i, j| T::lit(rows[i][j]))
}
