//! Geodesic explicit and implicit Euler.
//!
//! * GEE: `y_{n+1} = exp_{y_n}(h X|_{y_n})`
//! * GIE: `y_n = exp_{y_{n+1}}(−h X|_{y_{n+1}})`, solved for `y_{n+1}` by the
//!   defect correction `q ← π(q + (y_n − exp_q(−h X|_q)))` in the ambient
//!   model, where `π` maps back onto the manifold.

use std::fmt;

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::manifolds::{ChartPoint, TangentVector};
use crate::ode::rk4;

pub const DEFAULT_GIE_TOL: f64 = 1e-13;
pub const DEFAULT_GIE_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Gee,
    Gie,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Gee => "GEE",
            Method::Gie => "GIE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<ChartPoint>,
    pub h: f64,
    pub method: Method,
}

impl Trajectory {
    pub fn last(&self) -> &ChartPoint {
        self.points.last().expect("trajectory holds at least the initial point")
    }
}

fn scaled_field(field: &Field, p: &ChartPoint, h: f64) -> Result<TangentVector> {
    let x = field.eval(p)?;
    Ok(TangentVector { base: x.base, comps: x.comps * h })
}

/// `exp_p(h X|_p)`.
pub fn gee_step(field: &Field, p: &ChartPoint, h: f64) -> Result<ChartPoint> {
    field.manifold().exp_map(p, &scaled_field(field, p, h)?)
}

/// `d(exp_q(−h X|_q), p)`.
pub fn gie_defect(field: &Field, p: &ChartPoint, q: &ChartPoint, h: f64) -> Result<f64> {
    let m = field.manifold();
    let back = m.exp_map(q, &scaled_field(field, q, -h)?)?;
    m.distance(&back, p)
}

/// Solves `p = exp_q(−h X|_q)` for `q`.
pub fn gie_step(field: &Field, p: &ChartPoint, h: f64, tol: f64, max_iter: usize) -> Result<ChartPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("GIE tolerance must be positive, got {tol}")));
    }
    let m = field.manifold();
    let target = m.embed(p);
    let mut q = gee_step(field, p, h)?;
    let mut defect = f64::INFINITY;
    for _ in 0..=max_iter {
        let back = m.exp_map(&q, &scaled_field(field, &q, -h)?)?;
        defect = m.distance(&back, p)?;
        if defect <= tol {
            return Ok(q);
        }
        let next = m.embed(&q) + (&target - m.embed(&back));
        q = m.chart_from_ambient(&next)?;
    }
    Err(Error::NonConvergence { iterations: max_iter, defect })
}

pub fn step(field: &Field, p: &ChartPoint, h: f64, method: Method) -> Result<ChartPoint> {
    match method {
        Method::Gee => gee_step(field, p, h),
        Method::Gie => gie_step(field, p, h, DEFAULT_GIE_TOL, DEFAULT_GIE_MAX_ITER),
    }
}

/// `n_steps` steps of size `h` from `p0`.
pub fn integrate(field: &Field, p0: &ChartPoint, h: f64, n_steps: usize, method: Method) -> Result<Trajectory> {
    let mut points = Vec::with_capacity(n_steps + 1);
    points.push(p0.clone());
    for _ in 0..n_steps {
        let next = step(field, points.last().unwrap(), h, method)?;
        points.push(next);
    }
    Ok(Trajectory { points, h, method })
}

/// `d(step(p), step(q)) / d(p, q)`.
pub fn expansivity_ratio(field: &Field, p: &ChartPoint, q: &ChartPoint, h: f64, method: Method) -> Result<f64> {
    let m = field.manifold();
    let d0 = m.distance(p, q)?;
    if !(d0 > 0.0) {
        return Err(Error::InvalidArgument("expansivity ratio needs two distinct points".into()));
    }
    if h == 0.0 {
        return Ok(1.0);
    }
    let d1 = m.distance(&step(field, p, h, method)?, &step(field, q, h, method)?)?;
    Ok(d1 / d0)
}

/// Reference solution of `ẋ = X(x)` in chart coordinates by RK4.
pub fn reference_flow(field: &Field, p0: &ChartPoint, t: f64, steps: usize) -> Result<ChartPoint> {
    let m = field.manifold();
    let y = rk4(|c| field.components(c).as_slice().to_vec(), p0.coords.as_slice(), t, steps);
    m.point(&y)
}
