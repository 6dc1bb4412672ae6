//! Small dense helpers on top of nalgebra for d ≤ 4.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted for metric matrices.
const SYMMETRY_TOL: f64 = 1e-12;

/// Square root and inverse square root of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdRoots {
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
}

pub fn spd_roots(g: &DMatrix<f64>) -> Result<SpdRoots> {
    if !g.is_square() {
        return Err(Error::NotPositiveDefinite);
    }
    let scale = g.amax().max(f64::MIN_POSITIVE);
    if (g - g.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::NotPositiveDefinite);
    }
    let eig = SymmetricEigen::new(g.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let q = &eig.eigenvectors;
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let inv_root = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(SpdRoots {
        sqrt: q * root * q.transpose(),
        inv_sqrt: q * inv_root * q.transpose(),
    })
}

pub fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Top eigenpair of a symmetric matrix.
pub fn top_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(sym_part(m));
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, l)| if l > acc.1 { (i, l) } else { acc });
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// Singular value decomposition `m = U diag(s) Vᵀ` with `s` sorted in
/// decreasing order. Delegates to faer, which stays accurate when singular
/// values nearly coincide.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    let (r, c) = m.shape();
    let fm = faer::Mat::from_fn(r, c, |i, j| m[(i, j)]);
    let dec = fm
        .thin_svd()
        .map_err(|e| Error::Invariant(format!("singular value decomposition failed: {e:?}")))?;
    let (fu, fs, fv) = (dec.U(), dec.S(), dec.V());
    let k = r.min(c);
    let u = DMatrix::from_fn(r, k, |i, j| fu[(i, j)]);
    let v = DMatrix::from_fn(c, k, |i, j| fv[(i, j)]);
    let s = DVector::from_fn(k, |i, _| fs[i]);
    Ok(Svd { u, s, v })
}

/// g-inner product of coordinate vectors.
pub fn g_inner(g: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a.transpose() * g * b)[(0, 0)]
}

pub fn g_norm(g: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    g_inner(g, a, a).max(0.0).sqrt()
}
