//! Direction-swept expansivity tests, numerical maximal step sizes and the
//! parameter sweeps comparing them with the certified bounds.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bounds::{bound_for, Binding, BoundResult};
use crate::constants::{analytic, point_constants, StabilityConstants};
use crate::error::{Error, Result};
use crate::fields::{h2_field, h2_singular_field, linear_field, s2_field, s3_field, Field};
use crate::integrators::{expansivity_ratio, Method};
use crate::jacobi::{increment_delta, jacobi_eval, GeeOperator};
use crate::linalg::top_eigenpair;
use crate::manifolds::{ChartPoint, Manifold, TangentVector};

/// A sweep value of `Δ` above this counts as expansive.
pub const EXPANSIVE_TOL: f64 = 1e-12;
/// Directions per sweep: angle grid size for d = 2, Fibonacci points for d = 3.
pub const DEFAULT_DIRS_2D: usize = 512;
pub const DEFAULT_DIRS_3D: usize = 2048;
/// Subdivision of the grid spacing around the coarse argmax.
pub const REFINE_FACTOR: usize = 8;
pub const DEFAULT_H_LO: f64 = 1e-6;
pub const DEFAULT_H_HI: f64 = 1e3;
pub const DEFAULT_TOL_H: f64 = 1e-10;
/// Scan density of the numerical maximal-step search, points per decade of h.
pub const SCAN_PER_DECADE: usize = 64;
pub const PAIR_DISTANCE: f64 = 1e-5;
pub const PAIR_DIRECTIONS: usize = 64;
pub const JACOBI_TOLERANCE: f64 = 1e-6;
/// Relative tolerance between analytic and numeric constants.
pub const CONSTANT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_EPSILONS: [f64; 3] = [0.5, 1.0, 2.0];
pub const DEFAULT_S3_THETA: f64 = PI / 3.0;
const FD_DELTA: f64 = 1e-5;

/// The built-in example problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    /// `ε cos φ ∂_φ + ∂_θ` on S².
    S2,
    /// `∂_x + ε ∂_y` on ℍ².
    H2,
    /// `y ∂_y` on ℍ².
    H2Singular,
    /// `−ε sin ψ ∂_ψ + ∂_φ` on S³.
    S3,
    /// `X(p) = −p/α` on ℝ².
    Euclid,
}

impl Example {
    pub const ALL: [Example; 5] = [Example::S2, Example::H2, Example::H2Singular, Example::S3, Example::Euclid];

    pub fn as_str(self) -> &'static str {
        match self {
            Example::S2 => "s2",
            Example::H2 => "h2",
            Example::H2Singular => "h2-singular",
            Example::S3 => "s3",
            Example::Euclid => "euclid",
        }
    }

    /// The example field. `param` is ε for the curved examples, α for
    /// `euclid` and ignored for `h2-singular`.
    pub fn field(self, param: f64) -> Result<Field> {
        if !(param > 0.0 && param.is_finite()) && self != Example::H2Singular {
            return Err(Error::InvalidArgument(format!("{self} needs a positive parameter, got {param}")));
        }
        Ok(match self {
            Example::S2 => s2_field(param),
            Example::H2 => h2_field(param),
            Example::H2Singular => h2_singular_field(),
            Example::S3 => s3_field(param),
            Example::Euclid => linear_field(DMatrix::identity(2, 2) * (-1.0 / param))?,
        })
    }

    /// Base point from the swept parameters: `φ₀` on S², `y₀` on ℍ² (with
    /// `x₀ = 0`), `(ψ₀, θ₀)` on S³ and `(x₀, y₀)` on ℝ².
    pub fn point(self, base1: f64, base2: Option<f64>) -> Result<ChartPoint> {
        match self {
            Example::S2 => Manifold::Sphere2.point(&[base1, 0.0]),
            Example::H2 | Example::H2Singular => Manifold::Hyperbolic2.point(&[0.0, base1]),
            Example::S3 => Manifold::Sphere3.point(&[base1, base2.unwrap_or(DEFAULT_S3_THETA), 0.0]),
            Example::Euclid => Manifold::Euclidean { dim: 2 }.point(&[base1, base2.unwrap_or(0.0)]),
        }
    }

    pub fn default_base(self) -> (f64, Option<f64>) {
        match self {
            Example::S2 => (FRAC_PI_4, None),
            Example::H2 | Example::H2Singular => (1.0, None),
            Example::S3 => (FRAC_PI_4, Some(DEFAULT_S3_THETA)),
            Example::Euclid => (1.0, Some(0.0)),
        }
    }

    /// Default 40-point sweep grid of the first base parameter.
    pub fn default_grid(self) -> GridSpec {
        match self {
            Example::S2 | Example::S3 => GridSpec { start: 0.1, stop: 1.47, count: 40 },
            Example::H2 | Example::H2Singular => GridSpec { start: 0.2, stop: 4.0, count: 40 },
            Example::Euclid => GridSpec { start: 0.5, stop: 2.0, count: 40 },
        }
    }

    /// Whether `base1` lies in the region where the example field is
    /// cocoercive.
    pub fn in_domain(self, base1: f64) -> bool {
        match self {
            Example::S2 | Example::S3 => base1 > 0.0 && base1 < FRAC_PI_2,
            Example::H2 | Example::H2Singular => base1 > 0.0 && base1.is_finite(),
            Example::Euclid => base1.is_finite(),
        }
    }

    fn random_point(self, rng: &mut ChaCha8Rng) -> Result<ChartPoint> {
        let c = match self {
            Example::S2 => vec![rng.gen_range(-1.3..1.3), rng.gen_range(-PI..PI)],
            Example::H2 | Example::H2Singular => vec![rng.gen_range(-2.0..2.0), rng.gen_range(0.3..3.0)],
            Example::S3 => vec![rng.gen_range(0.3..PI - 0.3), rng.gen_range(0.3..PI - 0.3), rng.gen_range(-PI..PI)],
            Example::Euclid => {
                let r = rng.gen_range(0.2..2.0);
                let t: f64 = rng.gen_range(-PI..PI);
                vec![r * t.cos(), r * t.sin()]
            }
        };
        match self {
            Example::S2 => Manifold::Sphere2.point(&c),
            Example::H2 | Example::H2Singular => Manifold::Hyperbolic2.point(&c),
            Example::S3 => Manifold::Sphere3.point(&c),
            Example::Euclid => Manifold::Euclidean { dim: 2 }.point(&c),
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Example::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown example '{s}'")))
    }
}

/// `count` equally spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.stop } else { self.start + i as f64 * step }).collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// Parses `start:stop:count`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("grid '{s}' is not start:stop:count"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if count == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(Error::InvalidArgument(format!("grid '{s}' needs finite ends and count >= 1")));
        }
        Ok(GridSpec { start, stop, count })
    }
}

/// Worst direction found by a sweep, as frame coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMax {
    pub delta: f64,
    pub direction: DVector<f64>,
}

/// Unit directions of the sweep grid in frame coefficients.
pub fn sweep_directions(dim: usize, n_dirs: usize) -> Vec<DVector<f64>> {
    match dim {
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..n_dirs)
            .map(|k| {
                let w = TAU * k as f64 / n_dirs as f64;
                DVector::from_vec(vec![w.cos(), w.sin()])
            })
            .collect(),
        _ => fibonacci_sphere(n_dirs)
            .into_iter()
            .map(|v| {
                let mut a = DVector::zeros(dim);
                a.rows_mut(0, 3).copy_from_slice(&v);
                a
            })
            .collect(),
    }
}

/// Nearly uniform points on the unit 2-sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            [r * c, r * s, z]
        })
        .collect()
}

fn argmax(m: &DMatrix<f64>, dirs: &[DVector<f64>]) -> (f64, usize) {
    dirs.par_iter()
        .with_min_len(128)
        .enumerate()
        .map(|(i, a)| (increment_delta(m, a.as_slice()), i))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), |x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x })
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximum of `Δ` over the sweep grid at step `h`, refined around the coarse
/// argmax by a grid [`REFINE_FACTOR`] times finer, then polished by a
/// golden-section search (d = 2) or by the top eigenvector of the quadratic
/// form (d ≥ 3). Every candidate is evaluated through the increment matrix.
pub fn sweep_operator(op: &GeeOperator, h: f64, n_dirs: usize) -> Result<SweepMax> {
    let d = op.dim();
    if n_dirs < 8 {
        return Err(Error::InvalidArgument(format!("n_dirs must be at least 8, got {n_dirs}")));
    }
    let m = op.increment_matrix(h);
    let eval = |a: &DVector<f64>| increment_delta(&m, a.as_slice());
    let dirs = sweep_directions(d, n_dirs);
    let (mut best, i) = argmax(&m, &dirs);
    let mut best_dir = dirs[i].clone();
    match d {
        1 => {}
        2 => {
            let spacing = TAU / n_dirs as f64;
            let w0 = TAU * i as f64 / n_dirs as f64;
            let at = |w: f64| DVector::from_vec(vec![w.cos(), w.sin()]);
            let fine = spacing / REFINE_FACTOR as f64;
            let mut w_best = w0;
            for k in 0..=2 * REFINE_FACTOR {
                let w = w0 - spacing + k as f64 * fine;
                let v = eval(&at(w));
                if v > best {
                    best = v;
                    w_best = w;
                }
            }
            let (w, v) = golden_max(|w| eval(&at(w)), w_best - fine, w_best + fine);
            if v > best {
                best = v;
                w_best = w;
            }
            best_dir = at(w_best);
        }
        _ => {
            let spacing = (4.0 * PI / n_dirs as f64).sqrt();
            let a0 = best_dir.clone();
            let (t1, t2) = tangent_pair(&a0);
            let fine = spacing / REFINE_FACTOR as f64;
            let r = REFINE_FACTOR as i64;
            for i in -r..=r {
                for j in -r..=r {
                    let a = (&a0 + &t1 * (i as f64 * fine) + &t2 * (j as f64 * fine)).normalize();
                    let v = eval(&a);
                    if v > best {
                        best = v;
                        best_dir = a;
                    }
                }
            }
            let q = &m.transpose() * &m + &m + m.transpose();
            let (_, vec) = top_eigenpair(&q);
            if vec.iter().all(|x| x.is_finite()) && vec.norm() > 0.0 {
                let a = vec.normalize();
                let v = eval(&a);
                if v > best {
                    best = v;
                    best_dir = a;
                }
            }
        }
    }
    Ok(SweepMax { delta: best, direction: best_dir })
}

/// Two unit vectors orthogonal to `a` and to each other, in the span of the
/// first three coordinates.
fn tangent_pair(a: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let d = a.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(2);
    for k in 0..d {
        let mut v = DVector::zeros(d);
        v[k] = 1.0;
        v -= a * a.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let n = v.norm();
        if n > 1e-3 {
            basis.push(v / n);
        }
        if basis.len() == 2 {
            break;
        }
    }
    (basis[0].clone(), basis[1].clone())
}

/// Largest `‖S(1)‖² − ‖S(0)‖²` over unit directions at `p` for step `h`.
pub fn direction_sweep_delta(field: &Field, p: &ChartPoint, h: f64, n_dirs: usize) -> Result<f64> {
    let op = GeeOperator::new(field, p)?;
    Ok(sweep_operator(&op, h, n_dirs)?.delta)
}

/// Outcome of [`numerical_hmax`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalHmax {
    /// Last step found non-expansive; `h_hi` when `unconditional`.
    pub h: f64,
    /// No expansive step was found up to `h_hi`.
    pub unconditional: bool,
}

/// Smallest step at which the direction-swept `Δ` turns positive: a
/// log-spaced scan from `h_lo` to `h_hi` followed by bisection to width
/// `tol_h` on the first sign change.
pub fn numerical_hmax(field: &Field, p: &ChartPoint, n_dirs: usize, h_lo: f64, h_hi: f64, tol_h: f64) -> Result<NumericalHmax> {
    if !(h_lo > 0.0 && h_hi > h_lo && h_hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 < h_lo < h_hi < inf, got [{h_lo}, {h_hi}]")));
    }
    if !(tol_h > 0.0) {
        return Err(Error::InvalidArgument(format!("tol_h must be positive, got {tol_h}")));
    }
    let op = GeeOperator::new(field, p)?;
    let sweep = |h: f64| sweep_operator(&op, h, n_dirs).map(|s| s.delta);
    let d_lo = sweep(h_lo)?;
    if d_lo > EXPANSIVE_TOL {
        return Err(Error::Bracket { h_lo, delta: d_lo });
    }
    let decades = (h_hi / h_lo).log10();
    let n = ((decades * SCAN_PER_DECADE as f64).ceil() as usize).max(1);
    let mut lo = h_lo;
    let mut hi = None;
    for k in 1..=n {
        let h = if k == n { h_hi } else { h_lo * 10f64.powf(decades * k as f64 / n as f64) };
        if sweep(h)? > EXPANSIVE_TOL {
            hi = Some(h);
            break;
        }
        lo = h;
    }
    let Some(mut hi) = hi else {
        return Ok(NumericalHmax { h: h_hi, unconditional: true });
    };
    while hi - lo > tol_h {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sweep(mid)? > EXPANSIVE_TOL {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(NumericalHmax { h: lo, unconditional: false })
}

/// Largest GEE distance ratio over pairs `exp_p(∓δ/2·v)` for `n_dirs` unit
/// directions `v` at `p`.
pub fn finite_pair_ratio(field: &Field, p: &ChartPoint, h: f64, delta: f64, n_dirs: usize) -> Result<f64> {
    let m = field.manifold();
    let op = GeeOperator::new(field, p)?;
    let mut worst = f64::NEG_INFINITY;
    for a in sweep_directions(op.dim(), n_dirs) {
        let mut comps = DVector::zeros(m.dim());
        for (c, e) in a.iter().zip(&op.frame.vectors) {
            comps += &e.comps * *c;
        }
        let along = |s: f64| m.exp_map(p, &TangentVector { base: p.clone(), comps: &comps * s });
        let (q0, q1) = (along(-0.5 * delta)?, along(0.5 * delta)?);
        worst = worst.max(expansivity_ratio(field, &q0, &q1, h, Method::Gee)?);
    }
    Ok(worst)
}

/// One row of a figure sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub example: String,
    #[serde(serialize_with = "write_float")]
    pub epsilon: f64,
    #[serde(serialize_with = "write_float")]
    pub base1: f64,
    #[serde(serialize_with = "write_opt_float")]
    pub base2: Option<f64>,
    #[serde(serialize_with = "write_float")]
    pub h_numeric: f64,
    #[serde(serialize_with = "write_float")]
    pub h_theory: f64,
    #[serde(serialize_with = "write_float")]
    pub kappa_at_h: f64,
    #[serde(serialize_with = "write_binding", deserialize_with = "read_binding")]
    pub binding: Binding,
}

/// 17 significant digits; `inf` for the unconditional sentinel.
pub fn format_float(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn write_float<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_float(*x))
}

fn write_opt_float<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&format_float(*v)),
        None => s.serialize_str(""),
    }
}

fn write_binding<S: Serializer>(b: &Binding, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(b.as_str())
}

fn read_binding<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Binding, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Numeric constants at the base point, checked against the closed forms
/// where the example has them. The closed-form values are returned.
pub fn checked_constants(example: Example, eps: f64, p: &ChartPoint) -> Result<StabilityConstants> {
    let field = example.field(eps)?;
    let mut k = point_constants(&field, p)?;
    let c = p.coords.as_slice();
    let mut pins: Vec<(&str, f64, &mut f64)> = Vec::new();
    let mut mu_plus = k.mu_plus.unwrap_or(f64::NAN);
    let mut mu_minus = k.mu_minus.unwrap_or(f64::NAN);
    match example {
        Example::S2 => {
            pins.push(("alpha", analytic::s2_alpha(eps, c[0]), &mut k.alpha));
            pins.push(("mu_plus", analytic::s2_mu_plus(eps, c[0]), &mut mu_plus));
            pins.push(("C", analytic::s2_x_norm(eps, c[0]), &mut k.c));
        }
        Example::H2 => {
            pins.push(("alpha", analytic::h2_alpha(eps, c[1]), &mut k.alpha));
            pins.push(("mu_minus", analytic::h2_mu_minus(eps, c[1]), &mut mu_minus));
            pins.push(("sigma", analytic::h2_sigma(eps, c[1]), &mut k.sigma));
            pins.push(("C", analytic::h2_x_norm(eps, c[1]), &mut k.c));
        }
        Example::S3 => {
            pins.push(("alpha", analytic::s3_alpha(eps, c[0], c[1]), &mut k.alpha));
            pins.push(("C", analytic::s3_x_norm(eps, c[0], c[1]), &mut k.c));
        }
        Example::H2Singular | Example::Euclid => {}
    }
    for (name, exact, numeric) in pins {
        if !rel_close(exact, *numeric, CONSTANT_TOLERANCE) {
            return Err(Error::Invariant(format!(
                "{example} eps={eps} at {c:?}: analytic {name} = {exact:e} but numeric = {:e}",
                *numeric
            )));
        }
        *numeric = exact;
    }
    k.mu_plus = k.mu_plus.map(|_| mu_plus);
    k.mu_minus = k.mu_minus.map(|_| mu_minus);
    if example == Example::S2 || example == Example::H2 || example == Example::S3 {
        k.x_norm_min = k.c;
    }
    Ok(k)
}

/// Certified bound at a base point of an example.
pub fn theory_bound(example: Example, eps: f64, p: &ChartPoint) -> Result<(StabilityConstants, BoundResult)> {
    let k = checked_constants(example, eps, p)?;
    let b = bound_for(&k)?;
    Ok((k, b))
}

/// Settings shared by the rows of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub n_dirs: usize,
    pub tol_h: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

impl SweepSettings {
    pub fn for_example(example: Example) -> Self {
        let n_dirs = if example == Example::S3 { DEFAULT_DIRS_3D } else { DEFAULT_DIRS_2D };
        SweepSettings { n_dirs, tol_h: DEFAULT_TOL_H, h_lo: DEFAULT_H_LO, h_hi: DEFAULT_H_HI }
    }
}

/// Theory and numerics at one `(ε, base point)`.
pub fn sweep_row(example: Example, eps: f64, base1: f64, base2: Option<f64>, settings: &SweepSettings) -> Result<SweepRow> {
    let field = example.field(eps)?;
    let p = example.point(base1, base2)?;
    let (_, bound) = theory_bound(example, eps, &p)?;
    let num = numerical_hmax(&field, &p, settings.n_dirs, settings.h_lo, settings.h_hi, settings.tol_h)?;
    let base2 = match example {
        Example::S3 => Some(p.coords[1]),
        Example::Euclid => Some(p.coords[1]),
        _ => None,
    };
    Ok(SweepRow {
        example: example.as_str().to_string(),
        epsilon: eps,
        base1,
        base2,
        h_numeric: if num.unconditional { f64::INFINITY } else { num.h },
        h_theory: bound.h_max,
        kappa_at_h: bound.kappa_at_h,
        binding: bound.binding,
    })
}

/// One row per `(ε, base1)` in input order; rows run concurrently.
pub fn figure_sweep(
    example: Example,
    epsilons: &[f64],
    base_grid: &[f64],
    base2: Option<f64>,
    settings: &SweepSettings,
) -> Result<Vec<SweepRow>> {
    if let Some(b) = base_grid.iter().find(|b| !example.in_domain(**b)) {
        return Err(Error::InvalidArgument(format!("base parameter {b} is outside the {example} sweep domain")));
    }
    let cases: Vec<(f64, f64)> = epsilons.iter().flat_map(|e| base_grid.iter().map(move |b| (*e, *b))).collect();
    cases.par_iter().map(|(e, b)| sweep_row(example, *e, *b, base2, settings)).collect()
}

/// Rows violating `h_theory ≤ h_numeric + slack`.
pub fn soundness_violations(rows: &[SweepRow], slack: f64) -> Vec<&SweepRow> {
    rows.iter().filter(|r| !(r.h_theory <= r.h_numeric + slack)).collect()
}

/// Summary of [`jacobi_validation`].
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiReport {
    pub example: Example,
    pub n_cases: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Compares the closed-form `‖S(1)‖` of the GEE variation against central
/// differences of `s ↦ exp_{y(s)}(hX)` in the embedding, over `n_cases`
/// random points, unit directions, field parameters and steps `h ≤ 0.5`.
pub fn jacobi_validation(example: Example, n_cases: usize, seed: u64) -> Result<JacobiReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation: f64 = 0.0;
    for _ in 0..n_cases {
        let param = rng.gen_range(0.2..2.0);
        let field = example.field(param)?;
        let m = field.manifold();
        let p = example.random_point(&mut rng)?;
        let h = rng.gen_range(1e-3..=0.5);
        let op = GeeOperator::new(&field, &p)?;
        let a = if op.dim() == 3 {
            let v = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            if v.norm() < 1e-3 { DVector::from_vec(vec![0.0, 0.0, 1.0]) } else { v.normalize() }
        } else {
            let w: f64 = rng.gen_range(0.0..TAU);
            DVector::from_vec(vec![w.cos(), w.sin()])
        };
        let mut dir = DVector::zeros(m.dim());
        for (c, e) in a.iter().zip(&op.frame.vectors) {
            dir += &e.comps * *c;
        }
        let data = op.jacobi_data(&a, h);
        let u = TangentVector { base: p.clone(), comps: field.eval(&p)?.comps * h };
        let frame1 = m.parallel_frame(&op.frame, &u, 1.0)?;
        let closed = m.norm(&jacobi_eval(&data, &frame1, 1.0)?)?;

        let image = |s: f64| -> Result<DVector<f64>> {
            let ys = m.exp_map(&p, &TangentVector { base: p.clone(), comps: &dir * s })?;
            let xs = field.eval(&ys)?;
            let q = m.exp_map(&ys, &TangentVector { base: ys.clone(), comps: xs.comps * h })?;
            Ok(m.embed(&q))
        };
        let fd = (image(FD_DELTA)? - image(-FD_DELTA)?) / (2.0 * FD_DELTA);
        let fd_norm = m.ambient_inner(&fd, &fd).max(0.0).sqrt();
        max_deviation = max_deviation.max((closed - fd_norm).abs());
    }
    Ok(JacobiReport { example, n_cases, max_deviation, passed: max_deviation <= JACOBI_TOLERANCE })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::bound_positive;
    use crate::linalg::max_sym_eigenvalue;
    use std::f64::consts::FRAC_PI_3;

    fn exact_max_delta(op: &GeeOperator, h: f64) -> f64 {
        max_sym_eigenvalue(&op.delta_matrix(h))
    }

    #[test]
    fn example_names_round_trip() {
        for e in Example::ALL {
            assert_eq!(e.as_str().parse::<Example>().unwrap(), e);
        }
        assert!("torus".parse::<Example>().is_err());
    }

    #[test]
    fn grid_spec_parsing() {
        let g: GridSpec = "0.1:1.47:40".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 40);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[39], 1.47);
        assert_eq!("2:3:1".parse::<GridSpec>().unwrap().values(), vec![2.0]);
        for bad in ["1:2", "1:2:0", "a:2:3", "1:2:3:4", "1:inf:3"] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn fibonacci_points_are_unit_and_spread() {
        let pts = fibonacci_sphere(2048);
        let mean: [f64; 3] = [0, 1, 2].map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / 2048.0);
        for p in &pts {
            assert!(((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - 1.0).abs() < 1e-14);
        }
        assert!(mean.iter().all(|m| m.abs() < 1e-3), "{mean:?}");
    }

    #[test]
    fn sweep_matches_top_eigenvalue_of_quadratic_form() {
        let cases = [
            (s2_field(1.0), vec![FRAC_PI_4, 0.3]),
            (s2_field(0.5), vec![1.2, 0.0]),
            (h2_field(2.0), vec![0.4, 0.7]),
            (s3_field(1.0), vec![0.6, 1.1, 0.0]),
            (s3_field(0.5), vec![1.3, 0.4, 2.0]),
        ];
        for (f, c) in cases {
            let p = f.manifold().point(&c).unwrap();
            let op = GeeOperator::new(&f, &p).unwrap();
            let n = if op.dim() == 3 { DEFAULT_DIRS_3D } else { DEFAULT_DIRS_2D };
            for h in [0.01, 0.3, 1.0, 2.5] {
                let got = sweep_operator(&op, h, n).unwrap();
                let want = exact_max_delta(&op, h);
                assert!((want - got.delta).abs() < 1e-11 * want.abs().max(1.0), "{f:?} h={h}: {} vs {want}", got.delta);
                assert!((got.direction.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_vanishes_as_h_goes_to_zero() {
        let f = s2_field(1.0);
        let p = Manifold::Sphere2.point(&[FRAC_PI_4, 0.0]).unwrap();
        let mut prev = f64::INFINITY;
        for h in [1e-2, 1e-4, 1e-6, 1e-8] {
            let d = direction_sweep_delta(&f, &p, h, 512).unwrap();
            assert!(d.abs() < prev);
            prev = d.abs();
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn sweep_rejects_few_directions_and_stationary_points() {
        let f = s2_field(1.0);
        let p = Manifold::Sphere2.point(&[0.5, 0.0]).unwrap();
        assert!(direction_sweep_delta(&f, &p, 0.1, 4).is_err());
        let lin = Example::Euclid.field(1.0).unwrap();
        let origin = Manifold::Euclidean { dim: 2 }.point(&[0.0, 0.0]).unwrap();
        assert!(matches!(direction_sweep_delta(&lin, &origin, 0.1, 64), Err(Error::StationaryPoint { .. })));
    }

    #[test]
    fn singular_field_is_never_expansive() {
        let f = h2_singular_field();
        let p = Manifold::Hyperbolic2.point(&[0.0, 1.0]).unwrap();
        for h in [0.1, 1.0, 10.0, 100.0] {
            assert!(direction_sweep_delta(&f, &p, h, 512).unwrap() <= EXPANSIVE_TOL);
        }
        let r = numerical_hmax(&f, &p, 512, 1e-6, 1e3, 1e-8).unwrap();
        assert!(r.unconditional);
        assert_eq!(r.h, 1e3);
    }

    #[test]
    fn constant_flat_field_is_unconditional() {
        let f = crate::fields::generic_field(Manifold::Euclidean { dim: 2 }, "const", |_| vec![-1.0, 0.5]);
        let p = Manifold::Euclidean { dim: 2 }.point(&[0.3, 0.1]).unwrap();
        assert_eq!(direction_sweep_delta(&f, &p, 5.0, 64).unwrap(), 0.0);
        assert!(numerical_hmax(&f, &p, 64, 1e-3, 10.0, 1e-6).unwrap().unconditional);
    }

    #[test]
    fn flat_linear_field_hits_two_alpha() {
        for alpha in [0.5, 1.0, 3.0] {
            let f = Example::Euclid.field(alpha).unwrap();
            let p = Example::Euclid.point(1.0, Some(0.5)).unwrap();
            let r = numerical_hmax(&f, &p, 64, 1e-6, 1e3, 1e-12).unwrap();
            assert!(!r.unconditional);
            assert!((r.h - 2.0 * alpha).abs() < 1e-9, "{alpha}: {}", r.h);
        }
    }

    #[test]
    fn bracket_error_when_already_expansive() {
        let f = linear_field(DMatrix::identity(2, 2)).unwrap();
        let p = Manifold::Euclidean { dim: 2 }.point(&[1.0, 0.0]).unwrap();
        assert!(matches!(numerical_hmax(&f, &p, 64, 1e-3, 1.0, 1e-6), Err(Error::Bracket { .. })));
    }

    #[test]
    fn s2_step_beyond_theory_is_expansive_somewhere() {
        let f = s2_field(1.0);
        let p = Manifold::Sphere2.point(&[FRAC_PI_4, 0.0]).unwrap();
        let (_, b) = theory_bound(Example::S2, 1.0, &p).unwrap();
        let num = numerical_hmax(&f, &p, 4096, 1e-6, 1e3, 1e-12).unwrap();
        assert!(b.h_max <= num.h + 1e-9);
        let beyond = direction_sweep_delta(&f, &p, 1.1 * num.h.max(b.h_max), 4096).unwrap();
        assert!(beyond > 0.0);
    }

    #[test]
    fn s2_numerical_step_dominates_positive_bound() {
        let f = s2_field(1.0);
        let p = Manifold::Sphere2.point(&[FRAC_PI_3, 0.0]).unwrap();
        let k = point_constants(&f, &p).unwrap();
        let b = bound_positive(&k).unwrap();
        let num = numerical_hmax(&f, &p, 512, 1e-6, 1e3, 1e-10).unwrap();
        assert!(b.h_max <= num.h + 1e-9, "{} vs {}", b.h_max, num.h);
    }

    #[test]
    fn sweep_is_grid_independent() {
        let cases = [(Example::S2, 0.7, None), (Example::H2, 1.5, None), (Example::S3, 0.9, Some(1.0))];
        for (ex, b1, b2) in cases {
            let f = ex.field(1.0).unwrap();
            let p = ex.point(b1, b2).unwrap();
            let n = if ex == Example::S3 { DEFAULT_DIRS_3D } else { DEFAULT_DIRS_2D };
            let coarse = numerical_hmax(&f, &p, n, 1e-6, 1e3, DEFAULT_TOL_H).unwrap();
            let fine = numerical_hmax(&f, &p, 2 * n, 1e-6, 1e3, DEFAULT_TOL_H).unwrap();
            assert!((coarse.h - fine.h).abs() < DEFAULT_TOL_H, "{ex}: {} vs {}", coarse.h, fine.h);
        }
    }

    #[test]
    fn s2_opposite_directions_share_quadratic_terms() {
        let f = s2_field(1.0);
        let p = Manifold::Sphere2.point(&[0.6, 0.0]).unwrap();
        let op = GeeOperator::new(&f, &p).unwrap();
        let h = 0.4;
        let q = op.delta_matrix(h);
        for k in 0..16 {
            let w = 0.2 + k as f64 * 0.37;
            let a = DVector::from_vec(vec![w.cos(), w.sin()]);
            let b = DVector::from_vec(vec![w.cos(), -w.sin()]);
            let sum = op.delta(&a, h) + op.delta(&b, h);
            let diag = 2.0 * (q[(0, 0)] * a[0] * a[0] + q[(1, 1)] * a[1] * a[1]);
            assert!((sum - diag).abs() < 1e-12, "{sum} vs {diag}");
        }
    }

    #[test]
    fn figure_rows_are_sound_and_ordered() {
        let settings = SweepSettings::for_example(Example::S2);
        let grid = [0.3, 0.9, 1.4];
        let rows = figure_sweep(Example::S2, &[0.5, 2.0], &grid, None, &settings).unwrap();
        assert_eq!(rows.len(), 6);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.base1, grid[i % 3]);
            assert_eq!(r.epsilon, if i < 3 { 0.5 } else { 2.0 });
            assert!(r.h_theory > 0.0 && r.h_numeric.is_finite());
        }
        assert!(soundness_violations(&rows, 1e-9).is_empty());
        assert!(figure_sweep(Example::S2, &[1.0], &[1.6], None, &settings).is_err());
    }

    #[test]
    fn h2_rows_are_finite_and_positive() {
        let settings = SweepSettings::for_example(Example::H2);
        let rows = figure_sweep(Example::H2, &[1.0], &[0.2, 1.0, 4.0], None, &settings).unwrap();
        for r in &rows {
            assert!(r.h_theory > 0.0 && r.h_theory.is_finite());
            assert!(r.h_numeric > 0.0 && r.h_numeric.is_finite());
        }
        assert!(soundness_violations(&rows, 1e-9).is_empty());
    }

    #[test]
    fn finite_pairs_do_not_expand_at_theory_step() {
        for (ex, b1, b2) in [(Example::S2, 0.8, None), (Example::H2, 1.3, None), (Example::S3, 0.7, Some(1.0))] {
            let f = ex.field(1.0).unwrap();
            let p = ex.point(b1, b2).unwrap();
            let (_, b) = theory_bound(ex, 1.0, &p).unwrap();
            let r = finite_pair_ratio(&f, &p, b.h_max, PAIR_DISTANCE, PAIR_DIRECTIONS).unwrap();
            assert!(r <= 1.0 + 1e-9, "{ex}: {r}");
        }
    }

    #[test]
    fn jacobi_validation_examples() {
        let empty = jacobi_validation(Example::S2, 0, 1).unwrap();
        assert!(empty.passed && empty.max_deviation == 0.0);
        for ex in Example::ALL {
            let r = jacobi_validation(ex, 40, 7).unwrap();
            assert!(r.passed, "{ex}: {}", r.max_deviation);
        }
    }

    #[test]
    fn analytic_mismatch_is_an_invariant_error() {
        let p = Example::S2.point(0.5, None).unwrap();
        assert!(checked_constants(Example::S2, 1.0, &p).is_ok());
        let k = checked_constants(Example::H2, 1.5, &Example::H2.point(0.7, None).unwrap()).unwrap();
        assert!((k.alpha - analytic::h2_alpha(1.5, 0.7)).abs() == 0.0);
    }

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(2.0), "2.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, 123456.789, 1e-300] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
