//! Largest certified non-expansive GEE step sizes.
//!
//! * positive curvature: `h ≤ 2α − 2μ₊ g(κ₀)`, `κ₀ = hC√ρ ≤ π`
//! * negative curvature: `h ≤ 2/(1+σ²C²|ρ|) · (α κ coth κ − μ₋ g(κ)/(1+f₃(κ)))`
//!   for every `κ ∈ [0, hC√|ρ|]`
//! * negative curvature with `ker ∇X = span X`:
//!   `h ≤ arccoth((1+‖X‖²|ρ|σ²)/(2α‖X‖√|ρ|)) / (‖X‖√|ρ|)` for every sampled `‖X‖`
//! * flat: `h ≤ 2α`
//!
//! Here `g(κ) = f₂(κ) − √(f₁(κ)f₃(κ))` is [`curvature_gap`].

use std::f64::consts::PI;
use std::fmt;

use crate::constants::StabilityConstants;
use crate::error::{Error, Result};
use crate::jacobi::{curvature_gap, f_functions, kappa_coth, CurvatureSign};

/// Grid size for the inner minimisation over κ.
pub const KAPPA_GRID: usize = 2000;

/// Which result produced a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    Flat,
    PositiveCurvature,
    NegativeCurvature,
    SingularNegative,
}

/// What limited the returned step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binding {
    /// `h = 2α` (or the curvature correction is below round-off).
    Flat,
    /// The curvature correction determines `h`.
    Curvature,
    /// `κ₀ = π` reached before the inequality became tight.
    KappaCap,
    /// The inequality holds for every `h > 0`.
    Unconditional,
}

impl Binding {
    pub fn as_str(self) -> &'static str {
        match self {
            Binding::Flat => "flat",
            Binding::Curvature => "curvature",
            Binding::KappaCap => "kappa-cap",
            Binding::Unconditional => "unconditional",
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Binding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Binding::Flat),
            "curvature" => Ok(Binding::Curvature),
            "kappa-cap" => Ok(Binding::KappaCap),
            "unconditional" => Ok(Binding::Unconditional),
            other => Err(Error::InvalidArgument(format!("unknown binding '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    /// Largest certified step; `+∞` when unconditional.
    pub h_max: f64,
    /// `h_max·C·√|ρ|`.
    pub kappa_at_h: f64,
    pub theorem: Theorem,
    pub binding: Binding,
}

impl BoundResult {
    pub fn is_unconditional(&self) -> bool {
        self.binding == Binding::Unconditional
    }
}

fn require_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::NoBound { alpha })
    }
}

/// Bisection for the last point where a nondecreasing `excess` is `≤ 0`,
/// given `excess(lo) ≤ 0 < excess(hi)`.
fn last_feasible<F: Fn(f64) -> f64>(excess: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn flat_or_curvature(h: f64, alpha: f64) -> Binding {
    if 2.0 * alpha - h <= 1e-12 * 2.0 * alpha {
        Binding::Flat
    } else {
        Binding::Curvature
    }
}

/// `h ≤ 2α`.
pub fn euclidean_bound(alpha: f64) -> Result<BoundResult> {
    require_alpha(alpha)?;
    Ok(BoundResult { h_max: 2.0 * alpha, kappa_at_h: 0.0, theorem: Theorem::Flat, binding: Binding::Flat })
}

/// Right-hand side of the positive-curvature condition at `κ₀`.
pub fn positive_rhs(alpha: f64, mu_plus: f64, kappa0: f64) -> f64 {
    2.0 * alpha - 2.0 * mu_plus * curvature_gap(kappa0, CurvatureSign::Positive)
}

/// Largest `h` with `h ≤ 2α − 2μ₊ g(hC√ρ)` and `hC√ρ ≤ π`.
pub fn bound_positive(consts: &StabilityConstants) -> Result<BoundResult> {
    if !(consts.rho > 0.0) {
        return Err(Error::CurvatureSign { rho: consts.rho });
    }
    require_alpha(consts.alpha)?;
    let mu = consts.mu_plus.ok_or(Error::SingularCovariant)?;
    if !mu.is_finite() || !consts.c.is_finite() || consts.c < 0.0 {
        return Err(Error::InvalidArgument("μ₊ and C must be finite".into()));
    }
    let alpha = consts.alpha;
    let rate = consts.c * consts.rho.sqrt();
    let excess = |h: f64| h - positive_rhs(alpha, mu, h * rate);
    let flat = 2.0 * alpha;
    let cap = if rate > 0.0 { PI / rate } else { f64::INFINITY };
    let hi = flat.min(cap);
    let (h, binding) = if excess(hi) <= 0.0 {
        let b = if cap < flat { Binding::KappaCap } else { Binding::Flat };
        (hi, b)
    } else {
        let h = last_feasible(excess, 0.0, hi);
        (h, flat_or_curvature(h, alpha))
    };
    Ok(BoundResult { h_max: h, kappa_at_h: h * rate, theorem: Theorem::PositiveCurvature, binding })
}

/// Right-hand side of the negative-curvature condition at `κ`.
pub fn negative_rhs(alpha: f64, mu_minus: f64, sigma: f64, c: f64, rho_abs: f64, kappa: f64) -> f64 {
    let factor = 2.0 / (1.0 + sigma * sigma * c * c * rho_abs);
    let (_, _, f3) = f_functions(kappa, CurvatureSign::Negative);
    let penalty = if f3.is_finite() { curvature_gap(kappa, CurvatureSign::Negative) / (1.0 + f3) } else { 0.0 };
    factor * (alpha * kappa_coth(kappa) - mu_minus * penalty)
}

/// Golden-section refinement of a minimum bracketed by `[a, b]`.
fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    f1.min(f2)
}

/// `min f` over `[0, k]`: grid of `n` intervals, then golden-section refinement
/// around the best node.
fn grid_min<F: Fn(f64) -> f64>(f: &F, k: f64, n: usize) -> f64 {
    if k <= 0.0 {
        return f(0.0);
    }
    let step = k / n as f64;
    let (mut best_i, mut best) = (0usize, f(0.0));
    for i in 1..=n {
        let v = f(i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let a = (best_i.saturating_sub(1)) as f64 * step;
    let b = ((best_i + 1).min(n)) as f64 * step;
    best.min(golden_min(f, a, b))
}

/// Largest `h` such that `h ≤ RHS(κ)` for every `κ ∈ [0, hC√|ρ|]`.
pub fn bound_negative(consts: &StabilityConstants) -> Result<BoundResult> {
    if !(consts.rho < 0.0) {
        return Err(Error::CurvatureSign { rho: consts.rho });
    }
    require_alpha(consts.alpha)?;
    let mu = consts.mu_minus.ok_or(Error::SingularCovariant)?;
    if !mu.is_finite() || !consts.sigma.is_finite() || !consts.c.is_finite() || consts.c < 0.0 {
        return Err(Error::InvalidArgument("μ₋, σ and C must be finite".into()));
    }
    let (alpha, sigma, c, rho_abs) = (consts.alpha, consts.sigma, consts.c, consts.rho.abs());
    let rate = c * rho_abs.sqrt();
    let rhs = |k: f64| negative_rhs(alpha, mu, sigma, c, rho_abs, k);
    let excess_on = |h: f64, n: usize| h - grid_min(&rhs, h * rate, n);
    let hi = rhs(0.0);
    let mut h = if excess_on(hi, KAPPA_GRID) <= 0.0 {
        hi
    } else {
        last_feasible(|h| excess_on(h, KAPPA_GRID), 0.0, hi)
    };
    // confirm on a grid ten times finer; shrink onto it if the coarse grid missed a dip
    for _ in 0..50 {
        let fine = excess_on(h, 10 * KAPPA_GRID);
        if fine <= 1e-12 * h.max(1.0) {
            break;
        }
        h -= fine;
    }
    let binding = flat_or_curvature(h, alpha);
    Ok(BoundResult { h_max: h, kappa_at_h: h * rate, theorem: Theorem::NegativeCurvature, binding })
}

/// `½ ln((z+1)/(z−1))` for `z > 1`.
pub fn arccoth(z: f64) -> f64 {
    0.5 * (2.0 / (z - 1.0)).ln_1p()
}

/// Per-point singular-case bound at `‖X‖ = x`; `+∞` when unconditional.
pub fn singular_point_bound(alpha: f64, sigma: f64, rho_abs: f64, x: f64) -> Result<f64> {
    let r = x * rho_abs.sqrt();
    if r == 0.0 {
        return Ok(2.0 * alpha);
    }
    let z = (1.0 + r * r * sigma * sigma) / (2.0 * alpha * r);
    if z < 1.0 - 1e-12 {
        return Err(Error::InconsistentConstants { argument: z });
    }
    if z <= 1.0 + 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok(arccoth(z) / r)
}

/// Infimum of [`singular_point_bound`] over `‖X‖ ∈ [x_min, x_max]`.
pub fn bound_singular(consts: &StabilityConstants, x_norm_range: (f64, f64)) -> Result<BoundResult> {
    if !(consts.rho < 0.0) {
        return Err(Error::CurvatureSign { rho: consts.rho });
    }
    require_alpha(consts.alpha)?;
    let (lo, hi) = x_norm_range;
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid ‖X‖ range [{lo}, {hi}]")));
    }
    let (alpha, sigma, rho_abs) = (consts.alpha, consts.sigma, consts.rho.abs());
    for x in [lo, hi] {
        singular_point_bound(alpha, sigma, rho_abs, x)?;
    }
    let f = |x: f64| singular_point_bound(alpha, sigma, rho_abs, x).unwrap_or(f64::NAN);
    let h = if hi > lo {
        let n = KAPPA_GRID;
        let step = (hi - lo) / n as f64;
        let mut best_i = 0;
        let mut best = f(lo);
        for i in 1..=n {
            let v = singular_point_bound(alpha, sigma, rho_abs, lo + i as f64 * step)?;
            if v < best {
                best = v;
                best_i = i;
            }
        }
        if best.is_finite() {
            let a = lo + best_i.saturating_sub(1) as f64 * step;
            let b = lo + (best_i + 1).min(n) as f64 * step;
            best.min(golden_min(&f, a, b))
        } else {
            best
        }
    } else {
        f(lo)
    };
    let rate = consts.c * rho_abs.sqrt();
    if h.is_infinite() {
        return Ok(BoundResult {
            h_max: f64::INFINITY,
            kappa_at_h: f64::INFINITY,
            theorem: Theorem::SingularNegative,
            binding: Binding::Unconditional,
        });
    }
    Ok(BoundResult { h_max: h, kappa_at_h: h * rate, theorem: Theorem::SingularNegative, binding: flat_or_curvature(h, alpha) })
}

/// Picks the bound matching the curvature sign and the rank of ∇X.
pub fn bound_for(consts: &StabilityConstants) -> Result<BoundResult> {
    if consts.rho > 0.0 {
        bound_positive(consts)
    } else if consts.rho < 0.0 {
        if consts.singular || consts.mu_minus.is_none() {
            bound_singular(consts, (consts.x_norm_min, consts.c))
        } else {
            bound_negative(consts)
        }
    } else {
        euclidean_bound(consts.alpha)
    }
}
