use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {coords:?} lies outside the {model} chart domain")]
    Domain { model: &'static str, coords: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("tangent vectors are based at different points")]
    BasePointMismatch,

    #[error("degenerate direction: g-norm {norm:e} is below 1e-14")]
    DegenerateDirection { norm: f64 },

    #[error("vector field vanishes at {coords:?} (stationary point)")]
    StationaryPoint { coords: Vec<f64> },

    #[error("metric is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("covariant derivative is singular; use the range-restricted path")]
    SingularCovariant,

    #[error("no finite cocoercivity constant: range of the operator differs from range of its adjoint")]
    NoFiniteAlpha,

    #[error("kernel of dimension {dim} is not supported (only 1-dimensional kernels spanned by X)")]
    UnsupportedKernel { dim: usize },

    #[error("field is not cocoercive on the sampled region: alpha_p <= 0 at {points:?}")]
    NotCocoercive { points: Vec<Vec<f64>> },

    #[error("empty sample set")]
    EmptySample,

    #[error("no step-size bound: alpha = {alpha} is not positive")]
    NoBound { alpha: f64 },

    #[error("wrong curvature sign for this bound: rho = {rho}")]
    CurvatureSign { rho: f64 },

    #[error("inconsistent constants: arccoth argument {argument} < 1")]
    InconsistentConstants { argument: f64 },

    #[error("implicit step did not converge after {iterations} iterations (defect {defect:e})")]
    NonConvergence { iterations: usize, defect: f64 },

    #[error("direction sweep is already expansive at the lower bracket h = {h_lo} (delta = {delta:e})")]
    Bracket { h_lo: f64, delta: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
