//! Jacobi fields on constant-curvature spaces.
//!
//! Along a geodesic with parallel orthonormal frame `e₁(t) ∥ γ̇`, every Jacobi
//! field is
//!
//! ```text
//! J(t) = (a₁ + b₁ t) e₁(t) + Σᵢ₌₂..d (aᵢ c_κ(t) + bᵢ s_κ(t)) eᵢ(t)
//! ```
//!
//! with `c_κ, s_κ` the trigonometric, linear or hyperbolic pair selected by the
//! sign of the curvature and `κ = √|ρ|·‖γ̇(0)‖`. The stability analysis only
//! needs `‖J(1)‖² − ‖J(0)‖²`, which this module evaluates in a cancellation-free
//! way, together with the curvature functions `f₁, f₂, f₃` consumed by the
//! step-size bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::linalg::{g_inner, g_norm};
use crate::manifolds::{ChartPoint, Frame, Manifold, TangentVector, DEGENERATE_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurvatureSign {
    Positive,
    Zero,
    Negative,
}

impl CurvatureSign {
    pub fn of(rho: f64) -> Self {
        if rho > 0.0 {
            CurvatureSign::Positive
        } else if rho < 0.0 {
            CurvatureSign::Negative
        } else {
            CurvatureSign::Zero
        }
    }

    pub fn value(self) -> f64 {
        match self {
            CurvatureSign::Positive => 1.0,
            CurvatureSign::Zero => 0.0,
            CurvatureSign::Negative => -1.0,
        }
    }
}

/// Below this argument the small-κ series are used.
const SERIES_CUTOFF: f64 = 1.0;

/// `1 − sin(x)/x`, accurate for all x.
fn one_minus_sinc(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        // x²/3! − x⁴/5! + x⁶/7! − …
        let x2 = x * x;
        let mut term = x2 / 6.0;
        let mut acc: f64 = 0.0;
        let mut n = 3.0;
        while term.abs() > 1e-18 * acc.abs().max(f64::MIN_POSITIVE) {
            acc += term;
            term *= -x2 / ((n + 1.0) * (n + 2.0));
            n += 2.0;
        }
        acc
    } else {
        1.0 - x.sin() / x
    }
}

/// `sinh(x)/x − 1`, accurate for all x.
fn sinhc_minus_one(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        let mut term = x2 / 6.0;
        let mut acc: f64 = 0.0;
        let mut n = 3.0;
        while term.abs() > 1e-18 * acc.abs().max(f64::MIN_POSITIVE) {
            acc += term;
            term *= x2 / ((n + 1.0) * (n + 2.0));
            n += 2.0;
        }
        acc
    } else {
        x.sinh() / x - 1.0
    }
}

/// `c_κ(t)`.
pub fn ck(kappa: f64, t: f64, sign: CurvatureSign) -> f64 {
    match sign {
        CurvatureSign::Positive => (kappa * t).cos(),
        CurvatureSign::Zero => 1.0,
        CurvatureSign::Negative => (kappa * t).cosh(),
    }
}

/// `s_κ(t)`; the κ → 0 limit is `t` for every sign.
pub fn sk(kappa: f64, t: f64, sign: CurvatureSign) -> f64 {
    let x = kappa * t;
    match sign {
        CurvatureSign::Positive => t * (1.0 - one_minus_sinc(x)),
        CurvatureSign::Zero => t,
        CurvatureSign::Negative => t * (1.0 + sinhc_minus_one(x)),
    }
}

/// `(f₁, f₂, f₃)(κ)`: `sign(ρ)·(1 − c²)`, `sign(ρ)·(1 − c s)`, `sign(ρ)·(1 − s²)`
/// at `t = 1`. All three are nonnegative and vanish identically for ρ = 0.
pub fn f_functions(kappa: f64, sign: CurvatureSign) -> (f64, f64, f64) {
    match sign {
        CurvatureSign::Zero => (0.0, 0.0, 0.0),
        CurvatureSign::Positive => {
            let s = kappa.sin();
            let m = one_minus_sinc(kappa);
            // 1 − sinc² = (1 − sinc)(1 + sinc)
            (s * s, one_minus_sinc(2.0 * kappa), m * (2.0 - m))
        }
        CurvatureSign::Negative => {
            let s = kappa.sinh();
            let m = sinhc_minus_one(kappa);
            (s * s, sinhc_minus_one(2.0 * kappa), m * (2.0 + m))
        }
    }
}

/// `f₂(κ) − √(f₁(κ) f₃(κ))`, the curvature penalty shared by both theorems.
///
/// For ρ > 0 this is `(1 − cos κ sinc κ) − |sin κ| √(1 − sinc² κ)`. For ρ < 0
/// the two terms grow like `e^{2κ}/(4κ)` and cancel down to `κ/2 − 1`, so the
/// difference is rewritten with the conjugate and normalised by `cosh κ`.
pub fn curvature_gap(kappa: f64, sign: CurvatureSign) -> f64 {
    match sign {
        CurvatureSign::Zero => 0.0,
        CurvatureSign::Positive => {
            let (_, f2, f3) = f_functions(kappa, sign);
            f2 - kappa.sin().abs() * f3.sqrt()
        }
        CurvatureSign::Negative => {
            if kappa < SERIES_CUTOFF {
                let (_, f2, f3) = f_functions(kappa, sign);
                return f2 - kappa.sinh() * f3.sqrt();
            }
            let th = kappa.tanh();
            let sech = 1.0 / kappa.cosh();
            let inv_k = 1.0 / kappa;
            let root = (th * th * inv_k * inv_k - sech * sech).max(0.0).sqrt();
            th * (1.0 + inv_k * inv_k) / (inv_k + root) - 1.0
        }
    }
}

/// `κ coth κ` with its limit 1 at κ = 0.
pub fn kappa_coth(kappa: f64) -> f64 {
    let k = kappa.abs();
    if k < 1e-3 {
        let k2 = k * k;
        1.0 + k2 / 3.0 - k2 * k2 / 45.0
    } else {
        k / k.tanh()
    }
}

/// Frame coefficients of a Jacobi field: `aᵢ = ⟨J(0), eᵢ⟩`, `bᵢ = ⟨D_tJ(0), eᵢ⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiData {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub kappa: f64,
    pub sign: CurvatureSign,
    /// `bᵢ/κ` computed without forming `b` first (the step size cancels), so
    /// that `aᵢ + bᵢ/κ` vanishes exactly when it should.
    b_over_kappa: Option<DVector<f64>>,
}

impl JacobiData {
    pub fn new(a: DVector<f64>, b: DVector<f64>, kappa: f64, sign: CurvatureSign) -> Self {
        JacobiData { a, b, kappa, sign, b_over_kappa: None }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    fn ratio(&self, i: usize) -> f64 {
        match &self.b_over_kappa {
            Some(q) => q[i],
            None => self.b[i] / self.kappa,
        }
    }

    /// Coefficient of `eᵢ(t)`, `i ≥ 2`, and its increment over `aᵢ`.
    fn transverse(&self, i: usize, t: f64) -> (f64, f64) {
        let (a, b, k) = (self.a[i], self.b[i], self.kappa);
        let x = k * t;
        match self.sign {
            CurvatureSign::Zero => (a + b * t, b * t),
            CurvatureSign::Positive => {
                let half = (0.5 * x).sin();
                let inc = -2.0 * a * half * half + b * sk(k, t, self.sign);
                (a + inc, inc)
            }
            CurvatureSign::Negative => {
                if x > 1.0 {
                    // a cosh x + q sinh x = (a + q) cosh x − q e^{−x}
                    let q = self.ratio(i);
                    let end = (a + q) * x.cosh() - q * (-x).exp();
                    (end, end - a)
                } else {
                    let half = (0.5 * x).sinh();
                    let inc = 2.0 * a * half * half + b * sk(k, t, self.sign);
                    (a + inc, inc)
                }
            }
        }
    }

    /// Coefficients of `J(t)` in the parallel-transported frame.
    pub fn coefficients_at(&self, t: f64) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        if d == 0 {
            return out;
        }
        out[0] = self.a[0] + self.b[0] * t;
        for i in 1..d {
            out[i] = self.transverse(i, t).0;
        }
        out
    }

    /// `‖J(1)‖² − ‖J(0)‖²`, summed as `Σᵢ (endᵢ − aᵢ)(endᵢ + aᵢ)`.
    pub fn norm_change(&self) -> f64 {
        let d = self.dim();
        if d == 0 {
            return 0.0;
        }
        let mut acc = self.b[0] * (2.0 * self.a[0] + self.b[0]);
        for i in 1..d {
            let (end, inc) = self.transverse(i, 1.0);
            acc += inc * (end + self.a[i]);
        }
        acc
    }

    /// The same quantity in the closed form
    /// `‖w‖² + 2⟨v,w⟩ − sign(ρ) Σᵢ₌₂..d (aᵢ² f₁ + 2aᵢbᵢ f₂ + bᵢ² f₃)`.
    /// Loses accuracy for large negative-curvature κ; kept as a cross-check.
    pub fn norm_change_closed_form(&self) -> f64 {
        let (f1, f2, f3) = f_functions(self.kappa, self.sign);
        let ww = self.b.norm_squared();
        let vw = self.a.dot(&self.b);
        let mut tail = 0.0;
        for i in 1..self.dim() {
            let (a, b) = (self.a[i], self.b[i]);
            tail += a * a * f1 + 2.0 * a * b * f2 + b * b * f3;
        }
        ww + 2.0 * vw - self.sign.value() * tail
    }
}

/// Frame coefficients `⟨v, eᵢ⟩_g`.
pub fn frame_coefficients(manifold: Manifold, frame: &Frame, v: &TangentVector) -> Result<DVector<f64>> {
    if v.base != frame.base {
        return Err(Error::BasePointMismatch);
    }
    let g = manifold.metric(&frame.base)?;
    Ok(DVector::from_iterator(
        frame.vectors.len(),
        frame.vectors.iter().map(|e| g_inner(&g, &v.comps, &e.comps)),
    ))
}

/// Builds [`JacobiData`] for `J(0) = v`, `D_tJ(0) = w` in a given frame whose
/// first vector is tangent to the geodesic.
pub fn jacobi_data_in_frame(
    manifold: Manifold,
    frame: &Frame,
    v: &TangentVector,
    w: &TangentVector,
    kappa: f64,
) -> Result<JacobiData> {
    let a = frame_coefficients(manifold, frame, v)?;
    let b = frame_coefficients(manifold, frame, w)?;
    Ok(JacobiData::new(a, b, kappa, CurvatureSign::of(manifold.rho())))
}

/// `‖J(1)‖² − ‖J(0)‖²` for the Jacobi field along `t ↦ exp_p(t u)` with
/// `J(0) = v` and `D_tJ(0) = w`.
pub fn norm_diff(manifold: Manifold, v: &TangentVector, w: &TangentVector, u: &TangentVector) -> Result<f64> {
    if v.base != w.base || v.base != u.base {
        return Err(Error::BasePointMismatch);
    }
    let frame = manifold.orthonormal_frame(&u.base, u)?;
    let kappa = manifold.rho().abs().sqrt() * manifold.norm(u)?;
    Ok(jacobi_data_in_frame(manifold, &frame, v, w, kappa)?.norm_change())
}

/// `J(t)` as a tangent vector, given the frame parallel-transported to `γ(t)`.
pub fn jacobi_eval(data: &JacobiData, frame_at_t: &Frame, t: f64) -> Result<TangentVector> {
    if frame_at_t.vectors.len() != data.dim() {
        return Err(Error::Dimension { expected: data.dim(), got: frame_at_t.vectors.len() });
    }
    let coeffs = data.coefficients_at(t);
    let d = data.dim();
    let mut comps = DVector::zeros(d);
    for (c, e) in coeffs.iter().zip(&frame_at_t.vectors) {
        comps += &e.comps * *c;
    }
    Ok(TangentVector { base: frame_at_t.base.clone(), comps })
}

/// ∇X at a point expressed in the frame `e₁ = X/‖X‖, e₂, …`. This is all the
/// GEE variation needs: for a direction with frame coefficients `a`, the
/// Jacobi data is `a` and `b = h·Â a` with `κ = h‖X‖√|ρ|`.
#[derive(Debug, Clone)]
pub struct GeeOperator {
    pub frame: Frame,
    /// Matrix of ∇X in the orthonormal frame.
    pub op: DMatrix<f64>,
    pub x_norm: f64,
    pub sign: CurvatureSign,
    /// `‖X‖·√|ρ|`, so that `κ = h·rate`.
    pub rate: f64,
}

impl GeeOperator {
    pub fn new(field: &Field, p: &ChartPoint) -> Result<Self> {
        let m = field.manifold();
        let x = field.eval(p)?;
        let g = m.metric(p)?;
        let x_norm = g_norm(&g, &x.comps);
        if !(x_norm >= DEGENERATE_NORM) {
            return Err(Error::StationaryPoint { coords: p.coords.as_slice().to_vec() });
        }
        let frame = m.orthonormal_frame(p, &x)?;
        let a = field.covariant_matrix(p)?.entries;
        let d = m.dim();
        let mut e = DMatrix::zeros(d, d);
        for (j, v) in frame.vectors.iter().enumerate() {
            e.set_column(j, &v.comps);
        }
        let op = e.transpose() * &g * a * &e;
        Ok(GeeOperator {
            frame,
            op,
            x_norm,
            sign: CurvatureSign::of(m.rho()),
            rate: x_norm * m.rho().abs().sqrt(),
        })
    }

    pub fn dim(&self) -> usize {
        self.op.nrows()
    }

    /// Jacobi data of the GEE variation for a direction with frame
    /// coefficients `a` and step `h`.
    pub fn jacobi_data(&self, a: &DVector<f64>, h: f64) -> JacobiData {
        let beta = &self.op * a;
        let b_over_kappa = (self.rate > 0.0).then(|| &beta / self.rate);
        JacobiData {
            a: a.clone(),
            b: beta * h,
            kappa: h * self.rate,
            sign: self.sign,
            b_over_kappa,
        }
    }

    /// `‖S(1)‖² − ‖S(0)‖²` for the GEE variation in direction `a`.
    pub fn delta(&self, a: &DVector<f64>, h: f64) -> f64 {
        self.jacobi_data(a, h).norm_change()
    }

    /// Matrix `M(h)` with `S(1) − S(0) = M a` in frame coefficients, built row
    /// by row so that `aᵢ + bᵢ/κ` cancellations happen on matrix entries.
    pub fn increment_matrix(&self, h: f64) -> DMatrix<f64> {
        let d = self.dim();
        let kappa = h * self.rate;
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            m[(0, j)] = h * self.op[(0, j)];
        }
        for i in 1..d {
            let row = self.op.row(i);
            match self.sign {
                CurvatureSign::Zero => {
                    for j in 0..d {
                        m[(i, j)] = h * row[j];
                    }
                }
                CurvatureSign::Positive => {
                    let half = (0.5 * kappa).sin();
                    let hs = h * sk(kappa, 1.0, self.sign);
                    for j in 0..d {
                        m[(i, j)] = hs * row[j];
                    }
                    m[(i, i)] -= 2.0 * half * half;
                }
                CurvatureSign::Negative if kappa > 1.0 => {
                    // row of (a + q) cosh κ − q e^{−κ} − a with q = Â a / rate
                    let (ch, em) = (kappa.cosh(), (-kappa).exp());
                    for j in 0..d {
                        let q = row[j] / self.rate;
                        let unit = if i == j { 1.0 } else { 0.0 };
                        let lead = if unit + q == 0.0 { 0.0 } else { (unit + q) * ch };
                        m[(i, j)] = lead - q * em - unit;
                    }
                }
                CurvatureSign::Negative => {
                    let half = (0.5 * kappa).sinh();
                    let hs = h * sk(kappa, 1.0, self.sign);
                    for j in 0..d {
                        m[(i, j)] = hs * row[j];
                    }
                    m[(i, i)] += 2.0 * half * half;
                }
            }
        }
        m
    }

    /// Symmetric matrix `Q(h)` with `delta(a, h) = aᵀ Q a`, by polarisation.
    pub fn delta_matrix(&self, h: f64) -> DMatrix<f64> {
        let d = self.dim();
        let mut q = DMatrix::zeros(d, d);
        let unit = |i: usize| {
            let mut v = DVector::zeros(d);
            v[i] = 1.0;
            v
        };
        for i in 0..d {
            q[(i, i)] = self.delta(&unit(i), h);
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let plus = self.delta(&(unit(i) + unit(j)), h);
                let minus = self.delta(&(unit(i) - unit(j)), h);
                q[(i, j)] = 0.25 * (plus - minus);
                q[(j, i)] = q[(i, j)];
            }
        }
        q
    }
}

/// `‖S(1)‖² − ‖S(0)‖² = ‖M a‖² + 2⟨a, M a⟩` for an increment matrix from
/// [`GeeOperator::increment_matrix`].
pub fn increment_delta(m: &DMatrix<f64>, a: &[f64]) -> f64 {
    let d = a.len();
    let mut acc = 0.0;
    for i in 0..d {
        let mut ma = 0.0;
        for (j, aj) in a.iter().enumerate() {
            ma += m[(i, j)] * aj;
        }
        acc += ma * (ma + 2.0 * a[i]);
    }
    acc
}

/// Jacobi data of the GEE variation `Γ(s, t) = exp_{y(s)}(t h X)` with
/// `S(0) = e`, `D_tS(0) = h ∇_e X`, `u = h X|_p`.
pub fn gee_jacobi_data(field: &Field, p: &ChartPoint, e: &TangentVector, h: f64) -> Result<JacobiData> {
    let op = GeeOperator::new(field, p)?;
    let a = frame_coefficients(field.manifold(), &op.frame, e)?;
    Ok(op.jacobi_data(&a, h))
}
