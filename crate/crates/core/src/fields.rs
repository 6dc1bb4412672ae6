//! Vector fields on the model spaces and their covariant derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifolds::{ChartPoint, Manifold, TangentVector};

/// Central finite-difference step used for fields without analytic partials.
pub const FD_STEP: f64 = 1e-6;

pub type ComponentFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum FieldKind {
    /// `ε cos φ ∂_φ + ∂_θ` on S².
    Sphere2 { eps: f64 },
    /// `∂_x + ε ∂_y` on ℍ².
    Hyperbolic2 { eps: f64 },
    /// `y ∂_y` on ℍ²; ∇X has a one-dimensional kernel spanned by X.
    Hyperbolic2Radial,
    /// `−ε sin ψ ∂_ψ + ∂_φ` on S³.
    Sphere3 { eps: f64 },
    /// `X(p) = A p` on ℝᵈ.
    Linear { matrix: DMatrix<f64> },
    /// User components; partials by central differences.
    Generic { label: String, components: ComponentFn },
    /// `a·X + b·Y`; partials are combined from the parts.
    Combination { a: f64, x: Box<Field>, b: f64, y: Box<Field> },
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Sphere2 { eps } => write!(f, "Sphere2 {{ eps: {eps} }}"),
            FieldKind::Hyperbolic2 { eps } => write!(f, "Hyperbolic2 {{ eps: {eps} }}"),
            FieldKind::Hyperbolic2Radial => write!(f, "Hyperbolic2Radial"),
            FieldKind::Sphere3 { eps } => write!(f, "Sphere3 {{ eps: {eps} }}"),
            FieldKind::Linear { matrix } => write!(f, "Linear {{ matrix: {matrix:?} }}"),
            FieldKind::Generic { label, .. } => write!(f, "Generic({label})"),
            FieldKind::Combination { a, x, b, y } => write!(f, "{a}·{:?} + {b}·{:?}", x.kind, y.kind),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    manifold: Manifold,
    kind: FieldKind,
}

/// Matrix of ∇X at a point in chart coordinates: `entries[(i, j)] = (∇X)ⁱⱼ`,
/// so that `(∇_v X)ⁱ = Σⱼ entries[(i, j)] vʲ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionMatrix {
    pub base: ChartPoint,
    pub entries: DMatrix<f64>,
}

pub fn s2_field(eps: f64) -> Field {
    Field { manifold: Manifold::Sphere2, kind: FieldKind::Sphere2 { eps } }
}

pub fn h2_field(eps: f64) -> Field {
    Field { manifold: Manifold::Hyperbolic2, kind: FieldKind::Hyperbolic2 { eps } }
}

pub fn h2_singular_field() -> Field {
    Field { manifold: Manifold::Hyperbolic2, kind: FieldKind::Hyperbolic2Radial }
}

pub fn s3_field(eps: f64) -> Field {
    Field { manifold: Manifold::Sphere3, kind: FieldKind::Sphere3 { eps } }
}

pub fn linear_field(matrix: DMatrix<f64>) -> Result<Field> {
    if !matrix.is_square() || matrix.nrows() == 0 {
        return Err(Error::InvalidArgument("linear field needs a square matrix".into()));
    }
    let dim = matrix.nrows();
    Ok(Field { manifold: Manifold::Euclidean { dim }, kind: FieldKind::Linear { matrix } })
}

pub fn generic_field<F>(manifold: Manifold, label: impl Into<String>, components: F) -> Field
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    Field {
        manifold,
        kind: FieldKind::Generic { label: label.into(), components: Arc::new(components) },
    }
}

impl Field {
    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// The field parameter ε where one exists.
    pub fn epsilon(&self) -> Option<f64> {
        match self.kind {
            FieldKind::Sphere2 { eps } | FieldKind::Hyperbolic2 { eps } | FieldKind::Sphere3 { eps } => {
                Some(eps)
            }
            _ => None,
        }
    }

    /// Raw component evaluation on chart coordinates (no domain check).
    pub fn components(&self, c: &[f64]) -> DVector<f64> {
        match &self.kind {
            FieldKind::Sphere2 { eps } => DVector::from_vec(vec![eps * c[0].cos(), 1.0]),
            FieldKind::Hyperbolic2 { eps } => DVector::from_vec(vec![1.0, *eps]),
            FieldKind::Hyperbolic2Radial => DVector::from_vec(vec![0.0, c[1]]),
            FieldKind::Sphere3 { eps } => DVector::from_vec(vec![-eps * c[0].sin(), 0.0, 1.0]),
            FieldKind::Linear { matrix } => matrix * DVector::from_column_slice(c),
            FieldKind::Generic { components, .. } => DVector::from_vec(components(c)),
            FieldKind::Combination { a, x, b, y } => x.components(c) * *a + y.components(c) * *b,
        }
    }

    pub fn eval(&self, p: &ChartPoint) -> Result<TangentVector> {
        let comps = self.components(p.coords.as_slice());
        self.manifold.tangent(p, comps.as_slice())
    }

    /// Partial derivatives `∂ⱼXⁱ`: analytic for the built-in fields, central
    /// differences with step [`FD_STEP`] for generic ones.
    pub fn jacobian(&self, p: &ChartPoint) -> Result<DMatrix<f64>> {
        self.manifold.metric(p)?;
        let c = p.coords.as_slice();
        let d = self.manifold.dim();
        let mut jac = DMatrix::zeros(d, d);
        match &self.kind {
            FieldKind::Sphere2 { eps } => jac[(0, 0)] = -eps * c[0].sin(),
            FieldKind::Hyperbolic2 { .. } => {}
            FieldKind::Hyperbolic2Radial => jac[(1, 1)] = 1.0,
            FieldKind::Sphere3 { eps } => jac[(0, 0)] = -eps * c[0].cos(),
            FieldKind::Linear { matrix } => jac.copy_from(matrix),
            FieldKind::Generic { .. } => jac = self.jacobian_fd(c),
            FieldKind::Combination { a, x, b, y } => jac = x.jacobian(p)? * *a + y.jacobian(p)? * *b,
        }
        Ok(jac)
    }

    /// Central-difference partials, available for every field.
    pub fn jacobian_fd(&self, c: &[f64]) -> DMatrix<f64> {
        let d = c.len();
        let mut jac = DMatrix::zeros(d, d);
        let mut cp = c.to_vec();
        let mut cm = c.to_vec();
        for j in 0..d {
            cp[j] = c[j] + FD_STEP;
            cm[j] = c[j] - FD_STEP;
            let col = (self.components(&cp) - self.components(&cm)) / (2.0 * FD_STEP);
            jac.set_column(j, &col);
            cp[j] = c[j];
            cm[j] = c[j];
        }
        jac
    }

    /// `(∇X)ⁱⱼ = ∂ⱼXⁱ + Γⁱⱼₖ Xᵏ`.
    pub fn covariant_matrix(&self, p: &ChartPoint) -> Result<ConnectionMatrix> {
        let mut entries = self.jacobian(p)?;
        let gam = self.manifold.christoffel(p)?;
        let x = self.components(p.coords.as_slice());
        let d = self.manifold.dim();
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += gam.get(i, j, k) * x[k];
                }
                entries[(i, j)] += acc;
            }
        }
        Ok(ConnectionMatrix { base: p.clone(), entries })
    }

    /// `∇_v X` as a tangent vector at `v.base`.
    pub fn directional_covariant(&self, v: &TangentVector) -> Result<TangentVector> {
        let a = self.covariant_matrix(&v.base)?;
        Ok(TangentVector { base: v.base.clone(), comps: a.entries * &v.comps })
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        if self.manifold != other.manifold {
            return Err(Error::InvalidArgument("fields live on different manifolds".into()));
        }
        Ok(Field {
            manifold: self.manifold,
            kind: FieldKind::Combination {
                a,
                x: Box::new(self.clone()),
                b,
                y: Box::new(other.clone()),
            },
        })
    }
}
