//! Constants entering the step-size bounds.
//!
//! Every quantity is computed in g-orthonormal coordinates: with
//! `S = g^{1/2}`, the operator `B = S A S⁻¹` is the matrix of ∇X in an
//! orthonormal basis, so g-inner products become Euclidean ones.
//!
//! * log g-norm: `λ_max(sym B)`
//! * cocoercivity: `−α = λ_max(sym(Σ⁻¹ Vᵀ U))` from the reduced SVD `B = U Σ Vᵀ`
//! * projection constants: `μ₊ = λ_max(sym(−(I−P) B⁻¹))`, `μ₋ = λ_max(sym(−P B⁻¹))`
//!   with `P` the orthogonal projector onto `S X`
//! * inverse bound: `σ = 1/σ_min(B)`, on the range of `B` when singular

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::linalg::{max_sym_eigenvalue, spd_roots, svd, Svd};
use crate::manifolds::ChartPoint;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// `Range(B)` and `Range(Bᵀ)` are accepted as equal when the principal-angle
/// residual is below this.
const RANGE_TOLERANCE: f64 = 1e-9;

/// `B = g^{1/2} A g^{−1/2}`.
pub fn orthonormal_operator(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.shape() != g.shape() || !a.is_square() {
        return Err(Error::Dimension { expected: g.nrows(), got: a.nrows() });
    }
    let r = spd_roots(g)?;
    Ok(&r.sqrt * a * &r.inv_sqrt)
}

/// SVD of `B` with its numerical rank.
struct RankedSvd {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    s: DVector<f64>,
    rank: usize,
}

fn ranked_svd(b: &DMatrix<f64>) -> Result<RankedSvd> {
    let Svd { u, s, v } = svd(b)?;
    let smax = s.get(0).copied().unwrap_or(0.0);
    let rank = if smax == 0.0 { 0 } else { s.iter().filter(|&&x| x >= RANK_TOLERANCE * smax).count() };
    Ok(RankedSvd { u, v, s, rank })
}

/// Logarithmic g-norm `sup ⟨Av,v⟩_g / ⟨v,v⟩_g`.
pub fn log_g_norm(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
    Ok(max_sym_eigenvalue(&orthonormal_operator(a, g)?))
}

/// Largest `α` with `⟨Av,v⟩_g ≤ −α‖Av‖_g²` for all `v`. A nonpositive value
/// means the operator is not cocoercive; `A = 0` gives `+∞`.
pub fn alpha_point(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
    let b = orthonormal_operator(a, g)?;
    let svd = ranked_svd(&b)?;
    let r = svd.rank;
    if r == 0 {
        return Ok(f64::INFINITY);
    }
    let u_r = svd.u.columns(0, r).into_owned();
    let v_r = svd.v.columns(0, r).into_owned();
    if r < b.nrows() {
        let leak = (&v_r - &u_r * (u_r.transpose() * &v_r)).amax();
        if leak > RANGE_TOLERANCE {
            return Err(Error::NoFiniteAlpha);
        }
    }
    let s_inv = DMatrix::from_diagonal(&svd.s.rows(0, r).map(|x| 1.0 / x));
    let m = s_inv * v_r.transpose() * u_r;
    Ok(-max_sym_eigenvalue(&m))
}

fn projected_constant(a: &DMatrix<f64>, g: &DMatrix<f64>, x: &DVector<f64>, complement: bool) -> Result<f64> {
    let roots = spd_roots(g)?;
    let b = &roots.sqrt * a * &roots.inv_sqrt;
    let svd = ranked_svd(&b)?;
    if svd.rank < b.nrows() {
        return Err(Error::SingularCovariant);
    }
    let b_inv = b.clone().try_inverse().ok_or(Error::SingularCovariant)?;
    let sx = &roots.sqrt * x;
    let n = sx.norm();
    if !(n >= crate::manifolds::DEGENERATE_NORM) {
        return Err(Error::DegenerateDirection { norm: n });
    }
    let xh = sx / n;
    let p = &xh * xh.transpose();
    let proj = if complement { DMatrix::identity(b.nrows(), b.nrows()) - p } else { p };
    Ok(max_sym_eigenvalue(&(-(proj * b_inv))))
}

/// Tightest `μ₊` with `⟨Av, (I−P_X)v⟩_g ≥ −μ₊‖Av‖_g²`.
pub fn mu_plus_point(a: &DMatrix<f64>, g: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    projected_constant(a, g, x, true)
}

/// Tightest `μ₋` with `⟨Av, P_X v⟩_g ≥ −μ₋‖Av‖_g²`.
pub fn mu_minus_point(a: &DMatrix<f64>, g: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    projected_constant(a, g, x, false)
}

/// g-operator norm of `A⁻¹`, or of the inverse of `A` restricted to its range
/// when `restrict_to_range` is set and the kernel is one-dimensional.
pub fn sigma_point(a: &DMatrix<f64>, g: &DMatrix<f64>, restrict_to_range: bool) -> Result<f64> {
    let b = orthonormal_operator(a, g)?;
    let svd = ranked_svd(&b)?;
    let d = b.nrows();
    if svd.rank == d {
        return Ok(1.0 / svd.s[d - 1]);
    }
    if !restrict_to_range {
        return Err(Error::SingularCovariant);
    }
    if d - svd.rank != 1 {
        return Err(Error::UnsupportedKernel { dim: d - svd.rank });
    }
    Ok(1.0 / svd.s[svd.rank - 1])
}

/// Constants of a field at one point or reduced over a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConstants {
    pub alpha: f64,
    /// `None` when ∇X is singular somewhere in the sample.
    pub mu_plus: Option<f64>,
    pub mu_minus: Option<f64>,
    pub sigma: f64,
    /// `sup ‖X‖_g`.
    pub c: f64,
    /// `inf ‖X‖_g`.
    pub x_norm_min: f64,
    pub rho: f64,
    /// Whether any sampled ∇X was singular.
    pub singular: bool,
}

/// All constants at a single point.
pub fn point_constants(field: &Field, p: &ChartPoint) -> Result<StabilityConstants> {
    let m = field.manifold();
    let g = m.metric(p)?;
    let a = field.covariant_matrix(p)?.entries;
    let x = field.eval(p)?.comps;
    let x_norm = crate::linalg::g_norm(&g, &x);
    let alpha = alpha_point(&a, &g)?;
    let (mu_plus, mu_minus, singular) = match mu_plus_point(&a, &g, &x) {
        Ok(mp) => (Some(mp), Some(mu_minus_point(&a, &g, &x)?), false),
        Err(Error::SingularCovariant) => (None, None, true),
        Err(e) => return Err(e),
    };
    let sigma = sigma_point(&a, &g, singular)?;
    Ok(StabilityConstants { alpha, mu_plus, mu_minus, sigma, c: x_norm, x_norm_min: x_norm, rho: m.rho(), singular })
}

/// Reduces point constants over a caller-supplied sample: `α` is the
/// minimum, `μ₊`, `μ₋`, `σ`, `C` the maxima.
pub fn region_constants<I>(field: &Field, sampler: I) -> Result<StabilityConstants>
where
    I: IntoIterator<Item = ChartPoint>,
{
    let mut acc: Option<StabilityConstants> = None;
    let mut offending = Vec::new();
    for p in sampler {
        let k = point_constants(field, &p)?;
        if !(k.alpha > 0.0) {
            offending.push(p.coords.as_slice().to_vec());
        }
        acc = Some(match acc {
            None => k,
            Some(s) => {
                let singular = s.singular || k.singular;
                let max_opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
                    (Some(a), Some(b)) if !singular => Some(a.max(b)),
                    _ => None,
                };
                StabilityConstants {
                    alpha: s.alpha.min(k.alpha),
                    mu_plus: max_opt(s.mu_plus, k.mu_plus),
                    mu_minus: max_opt(s.mu_minus, k.mu_minus),
                    sigma: s.sigma.max(k.sigma),
                    c: s.c.max(k.c),
                    x_norm_min: s.x_norm_min.min(k.x_norm_min),
                    rho: s.rho,
                    singular,
                }
            }
        });
    }
    if !offending.is_empty() {
        return Err(Error::NotCocoercive { points: offending });
    }
    acc.ok_or(Error::EmptySample)
}

/// Closed-form constants of the built-in example fields.
pub mod analytic {
    /// S² field `ε cos φ ∂_φ + ∂_θ`, upper hemisphere.
    pub fn s2_alpha(eps: f64, phi: f64) -> f64 {
        eps / ((1.0 + eps * eps) * phi.sin())
    }

    pub fn s2_log_norm(eps: f64, phi: f64) -> f64 {
        -eps * phi.sin()
    }

    pub fn s2_mu_plus(eps: f64, phi: f64) -> f64 {
        let r = (1.0 + eps * eps).sqrt();
        (1.0 + r / (2.0 * eps * (1.0 + eps * eps + eps * r))) * s2_alpha(eps, phi)
    }

    pub fn s2_x_norm(eps: f64, phi: f64) -> f64 {
        (1.0 + eps * eps).sqrt() * phi.cos()
    }

    /// ℍ² field `∂_x + ε ∂_y`.
    pub fn h2_alpha(eps: f64, y: f64) -> f64 {
        eps * y / (1.0 + eps * eps)
    }

    /// `−ε/y`; equals `−ε` only on the line `y = 1`.
    pub fn h2_log_norm(eps: f64, y: f64) -> f64 {
        -eps / y
    }

    pub fn h2_sigma(eps: f64, y: f64) -> f64 {
        y / (1.0 + eps * eps).sqrt()
    }

    pub fn h2_mu_minus(eps: f64, y: f64) -> f64 {
        ((1.0 + eps * eps).sqrt() / (2.0 * eps) + 0.5) * h2_alpha(eps, y)
    }

    pub fn h2_x_norm(eps: f64, y: f64) -> f64 {
        (1.0 + eps * eps).sqrt() / y
    }

    /// S³ field `−ε sin ψ ∂_ψ + ∂_φ`.
    pub fn s3_log_norm(eps: f64, psi: f64) -> f64 {
        -eps * psi.cos()
    }

    pub fn s3_alpha(eps: f64, psi: f64, theta: f64) -> f64 {
        let (c, st, ct) = (psi.cos(), theta.sin(), theta.cos());
        eps * c / (c * c * (eps * eps + st * st) + ct * ct)
    }

    pub fn s3_x_norm(eps: f64, psi: f64, theta: f64) -> f64 {
        psi.sin() * (eps * eps + theta.sin().powi(2)).sqrt()
    }
}
