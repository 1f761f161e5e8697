use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::check_dim;
use crate::{Error, Matrix, Result, Vector};

/// Built-in example fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedField {
    /// `(x₁, x₂) ↦ (ReLU(x₂), ReLU(x₁))`; divergence free.
    PermuteRelu,
    /// Every component is `exp(−‖x‖²)`.
    Gauss,
    /// `(x₁, x₂) ↦ (sin x₁ + sin x₂, sin x₁ + sin x₂)`.
    Sinsum,
}

impl NamedField {
    pub const ALL: [NamedField; 3] = [NamedField::PermuteRelu, NamedField::Gauss, NamedField::Sinsum];

    pub fn name(&self) -> &'static str {
        match self {
            NamedField::PermuteRelu => "permute_relu",
            NamedField::Gauss => "gauss",
            NamedField::Sinsum => "sinsum",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            NamedField::PermuteRelu => "(x1,x2) -> (ReLU(x2), ReLU(x1)), divergence free",
            NamedField::Gauss => "every component exp(-|x|^2), integrable with nonzero mass",
            NamedField::Sinsum => "(x1,x2) -> (sin x1 + sin x2, sin x1 + sin x2)",
        }
    }

    /// Required dimension, if fixed.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            NamedField::PermuteRelu | NamedField::Sinsum => Some(2),
            NamedField::Gauss => None,
        }
    }
}

/// How a [`VectorField`] is built.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    /// `x ↦ A x + b`.
    Affine {
        a: Matrix,
        b: Vector,
    },
    /// `x ↦ (σ(x_i) if active_i else 0)_i`.
    Separable {
        act: Activation,
        active: Vec<bool>,
    },
    /// `x ↦ S · base(W x + b)`.
    Conjugated {
        outer: Matrix,
        inner: Matrix,
        shift: Vector,
        base: Box<VectorField>,
    },
    /// `x ↦ Σ c_k f_k(x)`; never directly nested.
    Sum {
        terms: Vec<(f64, VectorField)>,
    },
    Named(NamedField),
    /// `x ↦ ∫_{[−R,R]^{d−1}} base(x₁, y) dy` by tensor trapezoidal rule with
    /// `nodes` points per axis. Depends on `x₁` only.
    Marginal {
        base: Box<VectorField>,
        radius: f64,
        nodes: usize,
    },
}

/// Immutable vector field on `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "super::schema::FieldDoc", into = "super::schema::FieldDoc")]
pub struct VectorField {
    dim: usize,
    kind: FieldKind,
}

fn finite_all<'a>(it: impl IntoIterator<Item = &'a f64>) -> bool {
    it.into_iter().all(|v| v.is_finite())
}

impl VectorField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn affine(a: Matrix, b: Vector) -> Result<Self> {
        let d = b.len();
        if d == 0 {
            return Err(Error::InvalidField("dimension must be positive".into()));
        }
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::InvalidField(format!(
                "affine matrix is {}x{}, shift has length {d}",
                a.nrows(),
                a.ncols()
            )));
        }
        if !finite_all(a.iter()) || !finite_all(b.iter()) {
            return Err(Error::InvalidField("non-finite affine entries".into()));
        }
        Ok(Self {
            dim: d,
            kind: FieldKind::Affine { a, b },
        })
    }

    pub fn linear(a: Matrix) -> Result<Self> {
        let d = a.nrows();
        Self::affine(a, Vector::zeros(d))
    }

    pub fn constant(b: Vector) -> Result<Self> {
        let d = b.len();
        Self::affine(Matrix::zeros(d, d), b)
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::constant(Vector::zeros(dim))
    }

    pub fn separable(act: Activation, active: Vec<bool>) -> Result<Self> {
        act.validate()?;
        if active.is_empty() {
            return Err(Error::InvalidField("dimension must be positive".into()));
        }
        Ok(Self {
            dim: active.len(),
            kind: FieldKind::Separable { act, active },
        })
    }

    /// `σ` applied to every coordinate.
    pub fn elementwise(act: Activation, dim: usize) -> Result<Self> {
        Self::separable(act, vec![true; dim])
    }

    /// `σ(x_k) e_k`.
    pub fn single_axis(act: Activation, dim: usize, axis: usize) -> Result<Self> {
        if axis >= dim {
            return Err(Error::AxisOutOfRange(format!("axis {axis} in dimension {dim}")));
        }
        let mut active = vec![false; dim];
        active[axis] = true;
        Self::separable(act, active)
    }

    pub fn relu(dim: usize) -> Result<Self> {
        Self::elementwise(Activation::Relu, dim)
    }

    pub fn conjugated(outer: Matrix, inner: Matrix, shift: Vector, base: VectorField) -> Result<Self> {
        let d = base.dim;
        let conforms = outer.nrows() == d
            && outer.ncols() == d
            && inner.nrows() == d
            && inner.ncols() == d
            && shift.len() == d;
        if !conforms {
            return Err(Error::InvalidField(format!(
                "conjugation matrices must be {d}x{d} with a length-{d} shift"
            )));
        }
        if !finite_all(outer.iter()) || !finite_all(inner.iter()) || !finite_all(shift.iter()) {
            return Err(Error::InvalidField("non-finite conjugation entries".into()));
        }
        Ok(Self {
            dim: d,
            kind: FieldKind::Conjugated {
                outer,
                inner,
                shift,
                base: Box::new(base),
            },
        })
    }

    /// Weighted sum; nested sums are flattened.
    pub fn sum(terms: Vec<(f64, VectorField)>) -> Result<Self> {
        let dim = match terms.first() {
            Some((_, f)) => f.dim,
            None => return Err(Error::InvalidField("empty sum".into())),
        };
        let mut flat = Vec::with_capacity(terms.len());
        for (c, f) in terms {
            if !c.is_finite() {
                return Err(Error::InvalidField("non-finite sum coefficient".into()));
            }
            check_dim(dim, f.dim)
                .map_err(|_| Error::InvalidField("sum terms must share a dimension".into()))?;
            match f.kind {
                FieldKind::Sum { terms: inner } => {
                    flat.extend(inner.into_iter().map(|(ci, fi)| (c * ci, fi)))
                }
                _ => flat.push((c, f)),
            }
        }
        Ok(Self {
            dim,
            kind: FieldKind::Sum { terms: flat },
        })
    }

    pub fn named(which: NamedField, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidField("dimension must be positive".into()));
        }
        if let Some(fixed) = which.fixed_dim() {
            if fixed != dim {
                return Err(Error::InvalidField(format!(
                    "{} is defined in dimension {fixed}",
                    which.name()
                )));
            }
        }
        Ok(Self {
            dim,
            kind: FieldKind::Named(which),
        })
    }

    pub fn marginal(base: VectorField, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || nodes < 2 {
            return Err(Error::InvalidField(
                "marginal needs a positive radius and at least 2 nodes".into(),
            ));
        }
        Ok(Self {
            dim: base.dim,
            kind: FieldKind::Marginal {
                base: Box::new(base),
                radius,
                nodes,
            },
        })
    }

    /// `c · f`, folding the scale into the representation where possible.
    pub fn scaled(&self, c: f64) -> Self {
        match &self.kind {
            FieldKind::Affine { a, b } => Self {
                dim: self.dim,
                kind: FieldKind::Affine { a: a * c, b: b * c },
            },
            FieldKind::Conjugated {
                outer,
                inner,
                shift,
                base,
            } => Self {
                dim: self.dim,
                kind: FieldKind::Conjugated {
                    outer: outer * c,
                    inner: inner.clone(),
                    shift: shift.clone(),
                    base: base.clone(),
                },
            },
            FieldKind::Sum { terms } => Self {
                dim: self.dim,
                kind: FieldKind::Sum {
                    terms: terms.iter().map(|(ci, f)| (c * ci, f.clone())).collect(),
                },
            },
            FieldKind::Separable { act, active } if c == -1.0 => {
                let flipped = match act {
                    Activation::Relu => Some(Activation::NegRelu),
                    Activation::NegRelu => Some(Activation::Relu),
                    _ => None,
                };
                match flipped {
                    Some(act) => Self {
                        dim: self.dim,
                        kind: FieldKind::Separable {
                            act,
                            active: active.clone(),
                        },
                    },
                    None => self.wrap_scaled(c),
                }
            }
            _ => self.wrap_scaled(c),
        }
    }

    fn wrap_scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            kind: FieldKind::Sum {
                terms: vec![(c, self.clone())],
            },
        }
    }

    /// `−f`.
    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// `f(x)`.
    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &Vector) -> Vector {
        match &self.kind {
            FieldKind::Affine { a, b } => a * x + b,
            FieldKind::Separable { act, active } => Vector::from_iterator(
                self.dim,
                x.iter()
                    .zip(active)
                    .map(|(&v, &on)| if on { act.eval(v) } else { 0.0 }),
            ),
            FieldKind::Conjugated {
                outer,
                inner,
                shift,
                base,
            } => {
                let y = inner * x + shift;
                outer * base.eval_unchecked(&y)
            }
            FieldKind::Sum { terms } => {
                let mut out = Vector::zeros(self.dim);
                for (c, f) in terms {
                    out.axpy(*c, &f.eval_unchecked(x), 1.0);
                }
                out
            }
            FieldKind::Named(which) => match which {
                NamedField::PermuteRelu => Vector::from_vec(vec![x[1].max(0.0), x[0].max(0.0)]),
                NamedField::Sinsum => {
                    let s = x[0].sin() + x[1].sin();
                    Vector::from_vec(vec![s, s])
                }
                NamedField::Gauss => {
                    let g = (-x.norm_squared()).exp();
                    Vector::from_element(self.dim, g)
                }
            },
            FieldKind::Marginal { base, radius, nodes } => marginal_profile(base, x[0], *radius, *nodes),
        }
    }

    /// Jacobian `∇f(x)`: analytic for every kind except `Marginal`, which uses
    /// a central difference in `x₁`. At ReLU kinks the derivative is taken as 0.
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        check_dim(self.dim, x.len())?;
        Ok(self.jacobian_unchecked(x))
    }

    pub(crate) fn jacobian_unchecked(&self, x: &Vector) -> Matrix {
        let d = self.dim;
        match &self.kind {
            FieldKind::Affine { a, .. } => a.clone(),
            FieldKind::Separable { act, active } => Matrix::from_diagonal(&Vector::from_iterator(
                d,
                x.iter()
                    .zip(active)
                    .map(|(&v, &on)| if on { act.derivative(v) } else { 0.0 }),
            )),
            FieldKind::Conjugated {
                outer,
                inner,
                shift,
                base,
            } => {
                let y = inner * x + shift;
                outer * base.jacobian_unchecked(&y) * inner
            }
            FieldKind::Sum { terms } => {
                let mut out = Matrix::zeros(d, d);
                for (c, f) in terms {
                    out += f.jacobian_unchecked(x) * *c;
                }
                out
            }
            FieldKind::Named(which) => match which {
                NamedField::PermuteRelu => {
                    let step = |t: f64| if t > 0.0 { 1.0 } else { 0.0 };
                    Matrix::from_row_slice(2, 2, &[0.0, step(x[1]), step(x[0]), 0.0])
                }
                NamedField::Sinsum => {
                    let (c1, c2) = (x[0].cos(), x[1].cos());
                    Matrix::from_row_slice(2, 2, &[c1, c2, c1, c2])
                }
                NamedField::Gauss => {
                    let g = (-x.norm_squared()).exp();
                    let row = x.transpose() * (-2.0 * g);
                    Matrix::from_fn(d, d, |_, j| row[j])
                }
            },
            FieldKind::Marginal { base, radius, nodes } => {
                let t = x[0];
                let h = f64::EPSILON.cbrt() * (1.0 + t.abs());
                let up = marginal_profile(base, t + h, *radius, *nodes);
                let dn = marginal_profile(base, t - h, *radius, *nodes);
                let col = (up - dn) / (2.0 * h);
                let mut j = Matrix::zeros(d, d);
                j.set_column(0, &col);
                j
            }
        }
    }

    /// True when every piece of the field is piecewise linear (affine or a
    /// ReLU-type activation), which makes some kinds of exactness checks valid.
    pub fn is_piecewise_linear(&self) -> bool {
        match &self.kind {
            FieldKind::Affine { .. } => true,
            FieldKind::Separable { act, .. } => act.is_piecewise_linear(),
            FieldKind::Conjugated { base, .. } => base.is_piecewise_linear(),
            FieldKind::Sum { terms } => terms.iter().all(|(_, f)| f.is_piecewise_linear()),
            FieldKind::Named(NamedField::PermuteRelu) => true,
            FieldKind::Named(_) | FieldKind::Marginal { .. } => false,
        }
    }

    /// `∇·f` when it does not depend on `x`.
    pub fn constant_divergence(&self) -> Option<f64> {
        match &self.kind {
            FieldKind::Affine { a, .. } => Some(a.trace()),
            FieldKind::Named(NamedField::PermuteRelu) => Some(0.0),
            FieldKind::Sum { terms } => terms
                .iter()
                .map(|(c, f)| f.constant_divergence().map(|v| c * v))
                .sum(),
            FieldKind::Conjugated {
                outer, inner, base, ..
            } => {
                // ∇·(S g(Wx + b)) = tr(W S ∇g), constant when W S = cI
                let ws = inner * outer;
                let c = ws.trace() / self.dim as f64;
                let off = (&ws - Matrix::identity(self.dim, self.dim) * c).amax();
                if off > 0.0 {
                    return None;
                }
                base.constant_divergence().map(|v| c * v)
            }
            FieldKind::Separable { .. } | FieldKind::Named(_) | FieldKind::Marginal { .. } => None,
        }
    }
}

/// Tensor trapezoidal integral of `base(t, y)` over `y ∈ [−R, R]^{d−1}`.
fn marginal_profile(base: &VectorField, t: f64, radius: f64, nodes: usize) -> Vector {
    let d = base.dim;
    if d == 1 {
        return base.eval_unchecked(&Vector::from_element(1, t));
    }
    let m = d - 1;
    let h = 2.0 * radius / (nodes - 1) as f64;
    let weight = |k: usize| if k == 0 || k == nodes - 1 { 0.5 * h } else { h };
    let mut idx = vec![0usize; m];
    let mut x = Vector::zeros(d);
    x[0] = t;
    let mut acc = Vector::zeros(d);
    loop {
        let mut w = 1.0;
        for (axis, &k) in idx.iter().enumerate() {
            x[axis + 1] = -radius + h * k as f64;
            w *= weight(k);
        }
        acc.axpy(w, &base.eval_unchecked(&x), 1.0);
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == m {
                return acc;
            }
            idx[axis] += 1;
            if idx[axis] < nodes {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}
