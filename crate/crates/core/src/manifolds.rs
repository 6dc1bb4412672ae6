//! Constant-curvature model spaces in explicit charts.
//!
//! Every curved model is also carried by an ambient embedding (the unit
//! sphere in ℝ³/ℝ⁴, the hyperboloid sheet in Minkowski ℝ²˒¹ for the half
//! plane). Geodesics, distances and parallel transport are closed-form in the
//! ambient picture; results are pulled back to the chart.
//!
//! Charts:
//!
//! * S²: `(φ, θ)`, elevation `φ ∈ (−π/2, π/2)`, azimuth `θ ∈ [0, 2π)`,
//!   metric `dφ² + cos²φ dθ²`.
//! * ℍ²: `(x, y)`, `y > 0`, metric `(dx² + dy²)/y²`.
//! * S³: `(ψ, θ, φ)`, `ψ, θ ∈ (0, π)`, `φ ∈ [0, 2π)`,
//!   metric `dψ² + sin²ψ dθ² + sin²ψ sin²θ dφ²`.
//! * ℝᵈ: Cartesian coordinates, identity metric.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{g_inner, g_norm};
use crate::ode::rk4;

/// Offset applied to endpoints that land on a chart singularity.
pub const CHART_NUDGE: f64 = 1e-12;

/// Directions with g-norm below this are treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-14;

/// The four supported model spaces, all with |ρ| ∈ {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Manifold {
    Sphere2,
    Hyperbolic2,
    Sphere3,
    Euclidean { dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub model: Manifold,
    pub coords: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub comps: DVector<f64>,
}

/// A g-orthonormal basis of the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub base: ChartPoint,
    pub vectors: Vec<TangentVector>,
}

/// Christoffel symbols Γᵏᵢⱼ stored densely as `data[(k·d + i)·d + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(dim: usize) -> Self {
        Christoffel { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Γᵏᵢⱼ with zero-based indices.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    fn set_sym(&mut self, k: usize, i: usize, j: usize, value: f64) {
        let d = self.dim;
        self.data[(k * d + i) * d + j] = value;
        self.data[(k * d + j) * d + i] = value;
    }

    /// Γ(u, w)ᵏ = Σᵢⱼ Γᵏᵢⱼ uⁱ wʲ.
    pub fn contract(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += self.get(k, i, j) * u[i] * w[j];
                    }
                }
                acc
            })
            .collect()
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if w >= TAU { 0.0 } else { w }
}

impl Manifold {
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Sphere2 | Manifold::Hyperbolic2 => 2,
            Manifold::Sphere3 => 3,
            Manifold::Euclidean { dim } => *dim,
        }
    }

    /// Sectional curvature ρ.
    pub fn rho(&self) -> f64 {
        match self {
            Manifold::Sphere2 | Manifold::Sphere3 => 1.0,
            Manifold::Hyperbolic2 => -1.0,
            Manifold::Euclidean { .. } => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Manifold::Sphere2 => "S2",
            Manifold::Hyperbolic2 => "H2",
            Manifold::Sphere3 => "S3",
            Manifold::Euclidean { .. } => "R^d",
        }
    }

    fn domain_error(&self, coords: &[f64]) -> Error {
        Error::Domain { model: self.name(), coords: coords.to_vec() }
    }

    fn check_coords(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: coords.len() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(self.domain_error(coords));
        }
        let ok = match self {
            Manifold::Sphere2 => coords[0].abs() < FRAC_PI_2,
            Manifold::Hyperbolic2 => coords[1] > 0.0,
            Manifold::Sphere3 => {
                coords[0] > 0.0 && coords[0] < PI && coords[1] > 0.0 && coords[1] < PI
            }
            Manifold::Euclidean { .. } => true,
        };
        if ok { Ok(()) } else { Err(self.domain_error(coords)) }
    }

    /// Builds a validated chart point; periodic azimuths are wrapped into [0, 2π).
    pub fn point(&self, coords: &[f64]) -> Result<ChartPoint> {
        self.check_coords(coords)?;
        let mut c = DVector::from_column_slice(coords);
        match self {
            Manifold::Sphere2 => c[1] = wrap_angle(c[1]),
            Manifold::Sphere3 => c[2] = wrap_angle(c[2]),
            _ => {}
        }
        Ok(ChartPoint { model: *self, coords: c })
    }

    fn check_point(&self, p: &ChartPoint) -> Result<()> {
        if p.model != *self {
            return Err(Error::InvalidArgument(format!(
                "point belongs to {}, not {}",
                p.model.name(),
                self.name()
            )));
        }
        self.check_coords(p.coords.as_slice())
    }

    pub fn tangent(&self, p: &ChartPoint, comps: &[f64]) -> Result<TangentVector> {
        self.check_point(p)?;
        if comps.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: comps.len() });
        }
        Ok(TangentVector { base: p.clone(), comps: DVector::from_column_slice(comps) })
    }

    pub fn zero_vector(&self, p: &ChartPoint) -> Result<TangentVector> {
        self.tangent(p, &vec![0.0; self.dim()])
    }

    /// Metric matrix g(p) in chart coordinates.
    pub fn metric(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        Ok(self.metric_unchecked(p.coords.as_slice()))
    }

    pub(crate) fn metric_unchecked(&self, c: &[f64]) -> DMatrix<f64> {
        match self {
            Manifold::Sphere2 => {
                let cp = c[0].cos();
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, cp * cp]))
            }
            Manifold::Hyperbolic2 => {
                let w = 1.0 / (c[1] * c[1]);
                DMatrix::from_diagonal(&DVector::from_vec(vec![w, w]))
            }
            Manifold::Sphere3 => {
                let s1 = c[0].sin();
                let s2 = c[1].sin();
                DMatrix::from_diagonal(&DVector::from_vec(vec![
                    1.0,
                    s1 * s1,
                    s1 * s1 * s2 * s2,
                ]))
            }
            Manifold::Euclidean { dim } => DMatrix::identity(*dim, *dim),
        }
    }

    /// Christoffel symbols of the Levi-Civita connection at `p`.
    pub fn christoffel(&self, p: &ChartPoint) -> Result<Christoffel> {
        self.check_point(p)?;
        Ok(self.christoffel_unchecked(p.coords.as_slice()))
    }

    pub(crate) fn christoffel_unchecked(&self, c: &[f64]) -> Christoffel {
        let mut gam = Christoffel::zeros(self.dim());
        match self {
            Manifold::Sphere2 => {
                let (s, co) = c[0].sin_cos();
                gam.set_sym(0, 1, 1, s * co);
                gam.set_sym(1, 0, 1, -s / co);
            }
            Manifold::Hyperbolic2 => {
                let inv = 1.0 / c[1];
                gam.set_sym(0, 0, 1, -inv);
                gam.set_sym(1, 0, 0, inv);
                gam.set_sym(1, 1, 1, -inv);
            }
            Manifold::Sphere3 => {
                let (s1, c1) = c[0].sin_cos();
                let (s2, c2) = c[1].sin_cos();
                gam.set_sym(0, 1, 1, -s1 * c1);
                gam.set_sym(0, 2, 2, -s1 * c1 * s2 * s2);
                gam.set_sym(1, 0, 1, c1 / s1);
                gam.set_sym(1, 2, 2, -s2 * c2);
                gam.set_sym(2, 0, 2, c1 / s1);
                gam.set_sym(2, 1, 2, c2 / s2);
            }
            Manifold::Euclidean { .. } => {}
        }
        gam
    }

    pub fn inner(&self, v: &TangentVector, w: &TangentVector) -> Result<f64> {
        if v.base != w.base {
            return Err(Error::BasePointMismatch);
        }
        let g = self.metric(&v.base)?;
        Ok(g_inner(&g, &v.comps, &w.comps))
    }

    pub fn norm(&self, v: &TangentVector) -> Result<f64> {
        let g = self.metric(&v.base)?;
        Ok(g_norm(&g, &v.comps))
    }

    // ---- ambient picture -------------------------------------------------

    /// Ambient bilinear form: Euclidean for spheres and ℝᵈ, Lorentzian
    /// `−a₀b₀ + a₁b₁ + a₂b₂` for the hyperboloid.
    pub fn ambient_inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Manifold::Hyperbolic2 => -a[0] * b[0] + a[1] * b[1] + a[2] * b[2],
            _ => a.dot(b),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Sphere2 | Manifold::Hyperbolic2 => 3,
            Manifold::Sphere3 => 4,
            Manifold::Euclidean { dim } => *dim,
        }
    }

    /// Embedding of a chart point.
    pub fn embed(&self, p: &ChartPoint) -> DVector<f64> {
        let c = p.coords.as_slice();
        match self {
            Manifold::Sphere2 => {
                let (sp, cp) = c[0].sin_cos();
                let (st, ct) = c[1].sin_cos();
                DVector::from_vec(vec![cp * ct, cp * st, sp])
            }
            Manifold::Hyperbolic2 => {
                let (x, y) = (c[0], c[1]);
                let r2 = x * x + y * y;
                DVector::from_vec(vec![(r2 + 1.0) / (2.0 * y), x / y, (r2 - 1.0) / (2.0 * y)])
            }
            Manifold::Sphere3 => {
                let (s1, c1) = c[0].sin_cos();
                let (s2, c2) = c[1].sin_cos();
                let (s3, c3) = c[2].sin_cos();
                DVector::from_vec(vec![c1, s1 * c2, s1 * s2 * c3, s1 * s2 * s3])
            }
            Manifold::Euclidean { .. } => p.coords.clone(),
        }
    }

    /// Jacobian of the embedding: column `j` is the ambient image of ∂ⱼ.
    pub fn embed_jacobian(&self, p: &ChartPoint) -> DMatrix<f64> {
        let c = p.coords.as_slice();
        match self {
            Manifold::Sphere2 => {
                let (sp, cp) = c[0].sin_cos();
                let (st, ct) = c[1].sin_cos();
                DMatrix::from_row_slice(3, 2, &[-sp * ct, -cp * st, -sp * st, cp * ct, cp, 0.0])
            }
            Manifold::Hyperbolic2 => {
                let (x, y) = (c[0], c[1]);
                let y2 = y * y;
                DMatrix::from_row_slice(
                    3,
                    2,
                    &[
                        x / y,
                        (y2 - x * x - 1.0) / (2.0 * y2),
                        1.0 / y,
                        -x / y2,
                        x / y,
                        (y2 - x * x + 1.0) / (2.0 * y2),
                    ],
                )
            }
            Manifold::Sphere3 => {
                let (s1, c1) = c[0].sin_cos();
                let (s2, c2) = c[1].sin_cos();
                let (s3, c3) = c[2].sin_cos();
                DMatrix::from_row_slice(
                    4,
                    3,
                    &[
                        -s1,
                        0.0,
                        0.0,
                        c1 * c2,
                        -s1 * s2,
                        0.0,
                        c1 * s2 * c3,
                        s1 * c2 * c3,
                        -s1 * s2 * s3,
                        c1 * s2 * s3,
                        s1 * c2 * s3,
                        s1 * s2 * c3,
                    ],
                )
            }
            Manifold::Euclidean { dim } => DMatrix::identity(*dim, *dim),
        }
    }

    pub fn embed_tangent(&self, v: &TangentVector) -> DVector<f64> {
        self.embed_jacobian(&v.base) * &v.comps
    }

    /// Projects an ambient vector back onto the model and reads off chart
    /// coordinates. Endpoints on a chart singularity are nudged inward by
    /// [`CHART_NUDGE`].
    pub fn chart_from_ambient(&self, a: &DVector<f64>) -> Result<ChartPoint> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(self.domain_error(a.as_slice()));
        }
        let coords: Vec<f64> = match self {
            Manifold::Sphere2 => {
                let n = a.norm();
                let (x, y, z) = (a[0] / n, a[1] / n, a[2] / n);
                let phi = z
                    .atan2(x.hypot(y))
                    .clamp(-FRAC_PI_2 + CHART_NUDGE, FRAC_PI_2 - CHART_NUDGE);
                vec![phi, wrap_angle(y.atan2(x))]
            }
            Manifold::Hyperbolic2 => {
                let q = -self.ambient_inner(a, a);
                if !(q > 0.0) || !(a[0] > 0.0) {
                    return Err(self.domain_error(a.as_slice()));
                }
                let s = q.sqrt();
                let (x0, x1, x2) = (a[0] / s, a[1] / s, a[2] / s);
                let y = 1.0 / (x0 - x2);
                if !(y > 0.0) || !y.is_finite() {
                    return Err(self.domain_error(a.as_slice()));
                }
                vec![x1 * y, y]
            }
            Manifold::Sphere3 => {
                let n = a.norm();
                let v: Vec<f64> = a.iter().map(|c| c / n).collect();
                let r123 = (v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
                let psi = r123.atan2(v[0]).clamp(CHART_NUDGE, PI - CHART_NUDGE);
                let theta = v[2].hypot(v[3]).atan2(v[1]).clamp(CHART_NUDGE, PI - CHART_NUDGE);
                vec![psi, theta, wrap_angle(v[3].atan2(v[2]))]
            }
            Manifold::Euclidean { .. } => a.as_slice().to_vec(),
        };
        self.point(&coords)
    }

    /// Chart components of an ambient tangent vector at `p`: solves
    /// `g c = Jᵀ η w`.
    pub fn tangent_from_ambient(&self, p: &ChartPoint, w: &DVector<f64>) -> Result<TangentVector> {
        let jac = self.embed_jacobian(p);
        let mut eta_w = w.clone();
        if let Manifold::Hyperbolic2 = self {
            eta_w[0] = -eta_w[0];
        }
        let rhs = jac.transpose() * eta_w;
        let g = self.metric(p)?;
        let comps = g
            .lu()
            .solve(&rhs)
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(TangentVector { base: p.clone(), comps })
    }

    fn renormalize(&self, a: &mut DVector<f64>) {
        match self {
            Manifold::Sphere2 | Manifold::Sphere3 => {
                let n = a.norm();
                *a /= n;
            }
            Manifold::Hyperbolic2 => {
                let q = -self.ambient_inner(a, a);
                if q > 0.0 {
                    *a /= q.sqrt();
                }
            }
            Manifold::Euclidean { .. } => {}
        }
    }

    /// Ambient point and velocity of the geodesic `t ↦ exp_p(t v)` at time t.
    fn ambient_geodesic(&self, p: &ChartPoint, v: &TangentVector, t: f64) -> (DVector<f64>, DVector<f64>) {
        let base = self.embed(p);
        let vel = self.embed_tangent(v);
        let speed = g_norm(&self.metric_unchecked(p.coords.as_slice()), &v.comps);
        if speed == 0.0 {
            return (base, vel);
        }
        let r = speed * t;
        let dir = &vel / speed;
        match self {
            Manifold::Sphere2 | Manifold::Sphere3 => {
                let (s, c) = r.sin_cos();
                let mut pos = &base * c + &dir * s;
                self.renormalize(&mut pos);
                let tan = (&base * (-s) + &dir * c) * speed;
                (pos, tan)
            }
            Manifold::Hyperbolic2 => {
                let (s, c) = (r.sinh(), r.cosh());
                let mut pos = &base * c + &dir * s;
                self.renormalize(&mut pos);
                let tan = (&base * s + &dir * c) * speed;
                (pos, tan)
            }
            Manifold::Euclidean { .. } => (&base + &vel * t, vel),
        }
    }

    /// Exponential map via closed-form geodesics in the ambient model.
    pub fn exp_map(&self, p: &ChartPoint, v: &TangentVector) -> Result<ChartPoint> {
        self.check_point(p)?;
        if v.base != *p {
            return Err(Error::BasePointMismatch);
        }
        if v.comps.iter().all(|&c| c == 0.0) {
            return Ok(p.clone());
        }
        match self {
            Manifold::Euclidean { .. } => {
                let q: Vec<f64> = (&p.coords + &v.comps).iter().copied().collect();
                return self.point(&q);
            }
            Manifold::Hyperbolic2 => return self.point(&half_plane_exp(p.coords[0], p.coords[1], v.comps[0], v.comps[1])),
            _ => {}
        }
        let (pos, _) = self.ambient_geodesic(p, v, 1.0);
        self.chart_from_ambient(&pos)
    }

    /// Exponential map through the ambient model for every model, including
    /// ℍ². Used to cross-check the half-plane closed form.
    pub fn exp_map_ambient(&self, p: &ChartPoint, v: &TangentVector) -> Result<ChartPoint> {
        self.check_point(p)?;
        if v.base != *p {
            return Err(Error::BasePointMismatch);
        }
        if let Manifold::Euclidean { .. } = self {
            return self.exp_map(p, v);
        }
        let (pos, _) = self.ambient_geodesic(p, v, 1.0);
        self.chart_from_ambient(&pos)
    }

    /// Exponential map by integrating the chart geodesic equation
    /// `ẍᵏ = −Γᵏᵢⱼ ẋⁱ ẋʲ` with RK4. Independent of the ambient closed forms;
    /// the geodesic must stay inside the chart.
    pub fn exp_map_ode(&self, p: &ChartPoint, v: &TangentVector, steps: usize) -> Result<ChartPoint> {
        self.check_point(p)?;
        let d = self.dim();
        let mut y0 = p.coords.as_slice().to_vec();
        y0.extend_from_slice(v.comps.as_slice());
        let model = *self;
        let y = rk4(
            |y| {
                let gam = model.christoffel_unchecked(&y[..d]);
                let acc = gam.contract(&y[d..], &y[d..]);
                let mut out = y[d..].to_vec();
                out.extend(acc.into_iter().map(|a| -a));
                out
            },
            &y0,
            1.0,
            steps,
        );
        self.point(&y[..d])
    }

    /// Geodesic distance. Spheres use the chord `2·asin(|P−Q|/2)`, ℍ² the
    /// half-plane form `2·asinh(|p−q|/(2√(y₁y₂)))`; both stay accurate for
    /// nearly coincident points.
    pub fn distance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(match self {
            Manifold::Sphere2 | Manifold::Sphere3 => {
                let chord = (self.embed(p) - self.embed(q)).norm();
                2.0 * (0.5 * chord).min(1.0).asin()
            }
            Manifold::Hyperbolic2 => {
                let (x1, y1) = (p.coords[0], p.coords[1]);
                let (x2, y2) = (q.coords[0], q.coords[1]);
                let e = (x1 - x2).hypot(y1 - y2);
                2.0 * (e / (2.0 * (y1 * y2).sqrt())).asinh()
            }
            Manifold::Euclidean { .. } => (&p.coords - &q.coords).norm(),
        })
    }

    /// g-orthonormal frame with `e₁ = first/‖first‖`, completed by
    /// Gram–Schmidt on the chart basis. In dimension ≥ 2 the last vector is
    /// flipped if needed so that the frame is positively oriented in the chart.
    pub fn orthonormal_frame(&self, p: &ChartPoint, first: &TangentVector) -> Result<Frame> {
        self.check_point(p)?;
        if first.base != *p {
            return Err(Error::BasePointMismatch);
        }
        let g = self.metric(p)?;
        let d = self.dim();
        let n0 = g_norm(&g, &first.comps);
        if !(n0 >= DEGENERATE_NORM) {
            return Err(Error::DegenerateDirection { norm: n0 });
        }
        let mut basis: Vec<DVector<f64>> = vec![&first.comps / n0];
        for j in 0..d {
            if basis.len() == d {
                break;
            }
            let mut cand = DVector::zeros(d);
            cand[j] = 1.0;
            let scale = g_norm(&g, &cand);
            // two passes of classical Gram–Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let c = g_inner(&g, &cand, b);
                    cand -= b * c;
                }
            }
            let n = g_norm(&g, &cand);
            if n > 1e-8 * scale {
                basis.push(cand / n);
            }
        }
        if d >= 2 {
            let mut m = DMatrix::zeros(d, d);
            for (j, b) in basis.iter().enumerate() {
                m.set_column(j, b);
            }
            if m.determinant() < 0.0 {
                let last = basis.len() - 1;
                basis[last] = -basis[last].clone();
            }
        }
        Ok(Frame {
            base: p.clone(),
            vectors: basis
                .into_iter()
                .map(|comps| TangentVector { base: p.clone(), comps })
                .collect(),
        })
    }

    /// Parallel transport of `frame` along `s ↦ exp_p(s u)` to `s = t`.
    pub fn parallel_frame(&self, frame: &Frame, u: &TangentVector, t: f64) -> Result<Frame> {
        let p = &frame.base;
        self.check_point(p)?;
        if u.base != *p {
            return Err(Error::BasePointMismatch);
        }
        if let Manifold::Euclidean { .. } = self {
            let q = self.point((&p.coords + &u.comps * t).as_slice())?;
            return Ok(Frame {
                base: q.clone(),
                vectors: frame
                    .vectors
                    .iter()
                    .map(|e| TangentVector { base: q.clone(), comps: e.comps.clone() })
                    .collect(),
            });
        }
        let speed = self.norm(u)?;
        if speed == 0.0 || t == 0.0 {
            return Ok(frame.clone());
        }
        let (pos, tan) = self.ambient_geodesic(p, u, t);
        let q = self.chart_from_ambient(&pos)?;
        let dir0 = self.embed_tangent(u) / speed;
        let dir_t = tan / speed;
        let vectors = frame
            .vectors
            .iter()
            .map(|e| {
                let w = self.embed_tangent(e);
                let along = self.ambient_inner(&w, &dir0);
                let moved = &w - &dir0 * along + &dir_t * along;
                self.tangent_from_ambient(&q, &moved)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Frame { base: q, vectors })
    }

    /// Parallel transport of a single vector by integrating
    /// `Ẇᵏ = −Γᵏᵢⱼ ẋⁱ Wʲ` alongside the chart geodesic. Test oracle for
    /// [`Manifold::parallel_frame`].
    pub fn transport_ode(
        &self,
        u: &TangentVector,
        w: &TangentVector,
        t: f64,
        steps: usize,
    ) -> Result<TangentVector> {
        let p = &u.base;
        self.check_point(p)?;
        let d = self.dim();
        let mut y0 = p.coords.as_slice().to_vec();
        y0.extend_from_slice(u.comps.as_slice());
        y0.extend_from_slice(w.comps.as_slice());
        let model = *self;
        let y = rk4(
            |y| {
                let gam = model.christoffel_unchecked(&y[..d]);
                let acc = gam.contract(&y[d..2 * d], &y[d..2 * d]);
                let dw = gam.contract(&y[d..2 * d], &y[2 * d..]);
                let mut out = y[d..2 * d].to_vec();
                out.extend(acc.into_iter().map(|a| -a));
                out.extend(dw.into_iter().map(|a| -a));
                out
            },
            &y0,
            t,
            steps,
        );
        let q = self.point(&y[..d])?;
        self.tangent(&q, &y[2 * d..])
    }
}

/// `exp_{(x,y)}(v)` in the half-plane. With `u = v/|v|` (Euclidean unit
/// direction) and `r = |v|/y` the geodesic length,
/// `y' = y/D`, `x' = x + y u_x sinh r / D`, `D = cosh r − u_y sinh r`.
/// `D` is evaluated as `e^r((1−u_y) + (1+u_y)e^{−2r})/2` with `1−u_y` formed
/// without cancellation, so large steps keep full relative accuracy.
fn half_plane_exp(x: f64, y: f64, vx: f64, vy: f64) -> Vec<f64> {
    let n = vx.hypot(vy);
    let (ux, uy) = (vx / n, vy / n);
    let r = n / y;
    let one_minus_uy = if uy > 0.0 { ux * ux / (1.0 + uy) } else { 1.0 - uy };
    let em2 = (-2.0 * r).exp();
    let d_scaled = 0.5 * (one_minus_uy + (1.0 + uy) * em2);
    // sinh(r)/e^r = (1 − e^{−2r})/2
    let sinh_scaled = -0.5 * (-2.0 * r).exp_m1();
    vec![x + y * ux * sinh_scaled / d_scaled, y * (-r).exp() / d_scaled]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn random_point(m: Manifold, rng: &mut ChaCha8Rng) -> ChartPoint {
        let c = match m {
            Manifold::Sphere2 => vec![rng.gen_range(-1.3..1.3), rng.gen_range(0.0..TAU)],
            Manifold::Hyperbolic2 => vec![rng.gen_range(-2.0..2.0), rng.gen_range(0.3..3.0)],
            Manifold::Sphere3 => vec![
                rng.gen_range(0.3..PI - 0.3),
                rng.gen_range(0.3..PI - 0.3),
                rng.gen_range(0.0..TAU),
            ],
            Manifold::Euclidean { dim } => (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        };
        m.point(&c).unwrap()
    }

    fn random_unit(m: Manifold, p: &ChartPoint, rng: &mut ChaCha8Rng) -> TangentVector {
        let d = m.dim();
        let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = m.tangent(p, &c).unwrap();
        let n = m.norm(&v).unwrap();
        TangentVector { base: p.clone(), comps: v.comps / n }
    }

    const CURVED: [Manifold; 3] = [Manifold::Sphere2, Manifold::Hyperbolic2, Manifold::Sphere3];

    #[test]
    fn metric_examples() {
        let s2 = Manifold::Sphere2;
        let g = s2.metric(&s2.point(&[0.0, 1.234]).unwrap()).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));
        let h2 = Manifold::Hyperbolic2;
        let g = h2.metric(&h2.point(&[0.0, 2.0]).unwrap()).unwrap();
        assert_eq!(g, DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 0.25])));
        let e3 = Manifold::Euclidean { dim: 3 };
        let g = e3.metric(&e3.point(&[5.0, -1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(g, DMatrix::identity(3, 3));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(Manifold::Hyperbolic2.point(&[0.0, 0.0]), Err(Error::Domain { .. })));
        assert!(matches!(Manifold::Sphere2.point(&[FRAC_PI_2, 0.0]), Err(Error::Domain { .. })));
        assert!(matches!(Manifold::Sphere3.point(&[1.0, 0.0, 0.0]), Err(Error::Domain { .. })));
        assert!(matches!(Manifold::Sphere2.point(&[0.0]), Err(Error::Dimension { .. })));
        assert!(matches!(Manifold::Sphere2.point(&[f64::NAN, 0.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn christoffel_tables() {
        let s2 = Manifold::Sphere2;
        let phi = 0.7;
        let g = s2.christoffel(&s2.point(&[phi, 2.0]).unwrap()).unwrap();
        assert!((g.get(0, 1, 1) - phi.sin() * phi.cos()).abs() < 1e-15);
        assert!((g.get(1, 1, 0) + phi.tan()).abs() < 1e-15);
        assert!((g.get(1, 0, 1) + phi.tan()).abs() < 1e-15);
        assert_eq!(g.get(0, 0, 0), 0.0);
        assert_eq!(g.get(0, 0, 1), 0.0);
        assert_eq!(g.get(1, 1, 1), 0.0);

        let h2 = Manifold::Hyperbolic2;
        let y = 1.7;
        let g = h2.christoffel(&h2.point(&[0.3, y]).unwrap()).unwrap();
        assert!((g.get(0, 0, 1) + 1.0 / y).abs() < 1e-15);
        assert!((g.get(0, 1, 0) + 1.0 / y).abs() < 1e-15);
        assert!((g.get(1, 0, 0) - 1.0 / y).abs() < 1e-15);
        assert!((g.get(1, 1, 1) + 1.0 / y).abs() < 1e-15);
        assert_eq!(g.get(0, 0, 0), 0.0);
        assert_eq!(g.get(1, 0, 1), 0.0);

        let e = Manifold::Euclidean { dim: 3 };
        let g = e.christoffel(&e.point(&[1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    /// Γᵏᵢⱼ = ½ gᵏˡ(∂ᵢgⱼₗ + ∂ⱼgᵢₗ − ∂ₗgᵢⱼ) by central differences of the metric.
    #[test]
    fn christoffel_matches_metric_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in CURVED {
            for _ in 0..20 {
                let p = random_point(m, &mut rng);
                let d = m.dim();
                let c = p.coords.as_slice().to_vec();
                let h = 1e-6;
                let dg: Vec<DMatrix<f64>> = (0..d)
                    .map(|l| {
                        let mut cp = c.clone();
                        let mut cm = c.clone();
                        cp[l] += h;
                        cm[l] -= h;
                        (m.metric_unchecked(&cp) - m.metric_unchecked(&cm)) / (2.0 * h)
                    })
                    .collect();
                let ginv = m.metric_unchecked(&c).try_inverse().unwrap();
                let gam = m.christoffel(&p).unwrap();
                for k in 0..d {
                    for i in 0..d {
                        for j in 0..d {
                            let mut acc = 0.0;
                            for l in 0..d {
                                acc += 0.5
                                    * ginv[(k, l)]
                                    * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                            }
                            assert!(
                                (acc - gam.get(k, i, j)).abs() < 1e-7,
                                "{:?} Γ^{k}_{i}{j}: {acc} vs {}",
                                m,
                                gam.get(k, i, j)
                            );
                            assert_eq!(gam.get(k, i, j), gam.get(k, j, i));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn metric_is_pullback_of_ambient_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in CURVED {
            for _ in 0..100 {
                let p = random_point(m, &mut rng);
                let jac = m.embed_jacobian(&p);
                let d = m.dim();
                let mut pull = DMatrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        pull[(i, j)] = m.ambient_inner(
                            &jac.column(i).into_owned(),
                            &jac.column(j).into_owned(),
                        );
                    }
                }
                let g = m.metric(&p).unwrap();
                assert!((pull - &g).amax() < 1e-12 * g.amax().max(1.0), "{m:?}");
                // embedded point lies on the model
                let e = m.embed(&p);
                let q = m.ambient_inner(&e, &e);
                let target = if m.rho() > 0.0 { 1.0 } else { -1.0 };
                assert!((q - target).abs() < 1e-12 * e.norm_squared().max(1.0));
            }
        }
    }

    #[test]
    fn embedding_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for m in CURVED {
            let p = random_point(m, &mut rng);
            let jac = m.embed_jacobian(&p);
            for j in 0..m.dim() {
                let mut cp = p.coords.clone();
                let mut cm = p.coords.clone();
                cp[j] += 1e-6;
                cm[j] -= 1e-6;
                let fd = (m.embed(&ChartPoint { model: m, coords: cp })
                    - m.embed(&ChartPoint { model: m, coords: cm }))
                    / 2e-6;
                assert!((fd - jac.column(j)).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [Manifold::Sphere2, Manifold::Hyperbolic2, Manifold::Sphere3, Manifold::Euclidean { dim: 3 }] {
            let p = random_point(m, &mut rng);
            let z = m.zero_vector(&p).unwrap();
            assert_eq!(m.exp_map(&p, &z).unwrap(), p);
        }
    }

    #[test]
    fn hyperbolic_vertical_geodesic() {
        let h2 = Manifold::Hyperbolic2;
        let p = h2.point(&[0.0, 1.0]).unwrap();
        let v = h2.tangent(&p, &[0.0, 1.0]).unwrap();
        let q = h2.exp_map(&p, &v).unwrap();
        // frozen from the RK4 geodesic oracle with step 1e-5
        let oracle = h2.exp_map_ode(&p, &v, 100_000).unwrap();
        assert!((&oracle.coords - DVector::from_vec(vec![0.0, E])).amax() < 1e-8);
        assert!((&q.coords - &oracle.coords).amax() < 1e-8);
        assert!(q.coords[0].abs() < 1e-14);
        assert!((h2.distance(&p, &q).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_quarter_turn_reaches_pole_neighbourhood() {
        let s2 = Manifold::Sphere2;
        let p = s2.point(&[0.0, 0.0]).unwrap();
        let v = s2.tangent(&p, &[FRAC_PI_2, 0.0]).unwrap();
        let q = s2.exp_map(&p, &v).unwrap();
        assert!((q.coords[0] - (FRAC_PI_2 - CHART_NUDGE)).abs() < 1e-15);
        assert!((s2.distance(&p, &q).unwrap() - FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn distance_examples() {
        let s2 = Manifold::Sphere2;
        let a = s2.point(&[0.0, 0.0]).unwrap();
        let b = s2.point(&[0.0, FRAC_PI_2]).unwrap();
        assert_eq!(s2.distance(&a, &a).unwrap(), 0.0);
        assert!((s2.distance(&a, &b).unwrap() - FRAC_PI_2).abs() < 1e-15);
        let h2 = Manifold::Hyperbolic2;
        let p = h2.point(&[0.0, 1.0]).unwrap();
        let q = h2.point(&[0.0, E]).unwrap();
        assert!((h2.distance(&p, &q).unwrap() - 1.0).abs() < 1e-15);
        assert!((h2.distance(&q, &p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_distance_matches_arc_length_of_ode_geodesic() {
        let h2 = Manifold::Hyperbolic2;
        let p = h2.point(&[0.0, 1.0]).unwrap();
        let v = h2.tangent(&p, &[0.0, 1.0]).unwrap();
        // arc length of t ↦ γ(t) with γ integrated numerically, sampled at 1000 points
        let n = 1000;
        let mut len = 0.0;
        let mut prev = p.clone();
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let vt = TangentVector { base: p.clone(), comps: &v.comps * t };
            let q = h2.exp_map_ode(&p, &vt, 2000).unwrap();
            let dy = q.coords[1] - prev.coords[1];
            let ym = 0.5 * (q.coords[1] + prev.coords[1]);
            len += dy.abs() / ym;
            prev = q;
        }
        let q = h2.point(&[0.0, E]).unwrap();
        assert!((h2.distance(&p, &q).unwrap() - len).abs() < 1e-6);
    }

    #[test]
    fn half_plane_exp_agrees_with_hyperboloid() {
        let m = Manifold::Hyperbolic2;
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for _ in 0..200 {
            let p = m.point(&[rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0)]).unwrap();
            let w = rng.gen_range(0.0..TAU);
            let len = rng.gen_range(0.0..3.0) * p.coords[1];
            let v = m.tangent(&p, &[len * w.cos(), len * w.sin()]).unwrap();
            let a = m.exp_map(&p, &v).unwrap();
            let b = m.exp_map_ambient(&p, &v).unwrap();
            assert!(m.distance(&a, &b).unwrap() < 1e-10);
        }
    }

    #[test]
    fn half_plane_exp_keeps_relative_accuracy_for_long_steps() {
        let m = Manifold::Hyperbolic2;
        let p = m.point(&[0.1, 1.3]).unwrap();
        let q = m.point(&[0.1, 1.3 + 1e-5]).unwrap();
        let up = |a: &ChartPoint| m.tangent(a, &[0.0, 10.0 * a.coords[1]]).unwrap();
        let (p1, q1) = (m.exp_map(&p, &up(&p)).unwrap(), m.exp_map(&q, &up(&q)).unwrap());
        let ratio = m.distance(&p1, &q1).unwrap() / m.distance(&p, &q).unwrap();
        assert!((ratio - 1.0).abs() < 1e-9, "{ratio}");
        let far = m.exp_map(&p, &m.tangent(&p, &[300.0 * 1.3, 0.0]).unwrap()).unwrap();
        assert!(far.coords.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn closed_form_exp_matches_geodesic_ode() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in CURVED {
            let mut checked = 0;
            while checked < 100 {
                let p = random_point(m, &mut rng);
                let u = random_unit(m, &p, &mut rng);
                let len = rng.gen_range(0.0..1.0);
                let v = TangentVector { base: p.clone(), comps: &u.comps * len };
                let q = m.exp_map(&p, &v).unwrap();
                // the oracle needs the whole geodesic inside the chart
                let Ok(o) = m.exp_map_ode(&p, &v, 10_000) else { continue };
                let mut diff = &q.coords - &o.coords;
                if m != Manifold::Hyperbolic2 {
                    let last = m.dim() - 1;
                    diff[last] = (diff[last] + PI).rem_euclid(TAU) - PI;
                }
                if q.coords.iter().chain(o.coords.iter()).any(|c| c.abs() > 1e6) {
                    continue;
                }
                // keep away from the azimuth singularities where charts blow up
                let edge = match m {
                    Manifold::Sphere2 => FRAC_PI_2 - q.coords[0].abs(),
                    Manifold::Sphere3 => q.coords[0].min(PI - q.coords[0]).min(q.coords[1]).min(PI - q.coords[1]),
                    _ => 1.0,
                };
                if edge < 0.05 {
                    continue;
                }
                assert!(diff.amax() < 1e-8, "{m:?}: {diff}");
                checked += 1;
            }
        }
    }

    #[test]
    fn distance_is_linear_along_geodesics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in CURVED {
            for _ in 0..30 {
                let p = random_point(m, &mut rng);
                let u = random_unit(m, &p, &mut rng);
                for t in [0.1, 0.5, 1.0, 2.0] {
                    let v = TangentVector { base: p.clone(), comps: &u.comps * t };
                    let q = m.exp_map(&p, &v).unwrap();
                    let d = m.distance(&p, &q).unwrap();
                    assert!((d - t).abs() <= 1e-8 * t, "{m:?} t={t} d={d}");
                }
            }
        }
    }

    #[test]
    fn frame_examples() {
        let s2 = Manifold::Sphere2;
        let (phi, eps) = (0.6, 0.8);
        let p = s2.point(&[phi, 1.0]).unwrap();
        let x = s2.tangent(&p, &[eps * phi.cos(), 1.0]).unwrap();
        let f = s2.orthonormal_frame(&p, &x).unwrap();
        let n = (1.0 + eps * eps).sqrt();
        let e1 = DVector::from_vec(vec![eps / n, 1.0 / (phi.cos() * n)]);
        let e2 = DVector::from_vec(vec![-1.0 / n, eps / (phi.cos() * n)]);
        assert!((&f.vectors[0].comps - e1).amax() < 1e-14);
        assert!((&f.vectors[1].comps - e2).amax() < 1e-14);

        let h2 = Manifold::Hyperbolic2;
        let y = 1.5;
        let p = h2.point(&[0.2, y]).unwrap();
        let x = h2.tangent(&p, &[1.0, eps]).unwrap();
        let f = h2.orthonormal_frame(&p, &x).unwrap();
        let e1 = DVector::from_vec(vec![y / n, y * eps / n]);
        let e2 = DVector::from_vec(vec![y * eps / n, -y / n]);
        assert!((&f.vectors[0].comps - e1).amax() < 1e-14);
        // equal up to sign
        let s = f.vectors[1].comps.dot(&e2).signum();
        assert!((&f.vectors[1].comps * s - e2).amax() < 1e-14);

        let e = Manifold::Euclidean { dim: 3 };
        let p = e.point(&[0.0, 0.0, 0.0]).unwrap();
        let f = e.orthonormal_frame(&p, &e.tangent(&p, &[1.0, 0.0, 0.0]).unwrap()).unwrap();
        for (i, v) in f.vectors.iter().enumerate() {
            let mut ei = DVector::zeros(3);
            ei[i] = 1.0;
            assert_eq!(v.comps, ei);
        }

        let z = e.zero_vector(&p).unwrap();
        assert!(matches!(e.orthonormal_frame(&p, &z), Err(Error::DegenerateDirection { .. })));
    }

    #[test]
    fn frames_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in CURVED {
            for _ in 0..50 {
                let p = random_point(m, &mut rng);
                let u = random_unit(m, &p, &mut rng);
                let f = m.orthonormal_frame(&p, &u).unwrap();
                assert_eq!(f.vectors.len(), m.dim());
                for (i, a) in f.vectors.iter().enumerate() {
                    for (j, b) in f.vectors.iter().enumerate() {
                        let ip = m.inner(a, b).unwrap();
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((ip - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn closed_form_transport_matches_transport_ode() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m in CURVED {
            for _ in 0..10 {
                let p = random_point(m, &mut rng);
                let u = random_unit(m, &p, &mut rng);
                let u = TangentVector { base: p.clone(), comps: &u.comps * 0.4 };
                let f = m.orthonormal_frame(&p, &u).unwrap();
                let t = 0.9;
                let Ok(moved) = m.parallel_frame(&f, &u, t) else { continue };
                for (e, closed) in f.vectors.iter().zip(&moved.vectors) {
                    let Ok(o) = m.transport_ode(&u, e, t, 5000) else { continue };
                    let diff = &closed.comps - &o.comps;
                    assert!(diff.amax() < 1e-8, "{m:?}: {diff}");
                }
                // transported frame is still orthonormal
                for (i, a) in moved.vectors.iter().enumerate() {
                    for (j, b) in moved.vectors.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((m.inner(a, b).unwrap() - want).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn azimuth_wraps_modulo_two_pi() {
        let s2 = Manifold::Sphere2;
        let p = s2.point(&[0.0, TAU - 0.1]).unwrap();
        let v = s2.tangent(&p, &[0.0, 0.3]).unwrap();
        let q = s2.exp_map(&p, &v).unwrap();
        assert!((q.coords[1] - 0.2).abs() < 1e-12);
        assert!((s2.distance(&p, &q).unwrap() - 0.3).abs() < 1e-12);
        let r = s2.point(&[0.0, -0.5]).unwrap();
        assert!((r.coords[1] - (TAU - 0.5)).abs() < 1e-15);
    }
}
