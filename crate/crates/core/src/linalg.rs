//! Dense complex helpers shared by the estimation, detection and RMT modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// One draw from CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Vector with i.i.d. CN(0, variance) entries.
pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVec {
    CVec::from_fn(len, |_, _| complex_normal(rng, variance))
}

/// Matrix with i.i.d. CN(0, variance) entries.
pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMat {
    // column-major fill keeps the draw order stable
    let data: Vec<C64> = (0..rows * cols)
        .map(|_| complex_normal(rng, variance))
        .collect();
    CMat::from_vec(rows, cols, data)
}

/// Solve `a x = b` for Hermitian positive-definite `a`.
pub fn hpd_solve(a: CMat, b: &CVec) -> Result<CVec> {
    Ok(hpd_cholesky(a)?.solve(b))
}

/// Cholesky factor of a Hermitian positive definite matrix.
///
/// The complex square root never fails, so the factor diagonal is checked
/// explicitly for real positive entries.
pub fn hpd_cholesky(a: CMat) -> Result<Cholesky<C64, Dyn>> {
    let scale = (0..a.nrows()).map(|i| a[(i, i)].re.abs()).fold(0.0_f64, f64::max);
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || !d.re.is_finite() || d.im.abs() > 1e-12 * scale.sqrt().max(1.0) {
            return Err(Error::NotPositiveDefinite);
        }
    }
    Ok(chol)
}

/// `max |a_i - b_i| / max(|b|_inf, tiny)`.
pub fn relative_difference(a: &CVec, b: &CVec) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let diff = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0_f64, f64::max);
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Relative difference of two matrices in the max-entry sense.
pub fn relative_difference_mat(a: &CMat, b: &CMat) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let diff = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0_f64, f64::max);
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Scalar relative error `|a - b| / |b|` (absolute when `b == 0`).
pub fn relative_error(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Real part of `tr(a b)` without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Identity scaled by `s`.
pub fn scaled_identity(n: usize, s: f64) -> CMat {
    CMat::from_diagonal_element(n, n, C64::new(s, 0.0))
}

/// `diag(values)` as a dense real matrix.
pub fn real_diagonal(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}
