//! Closed-form flows and the compiled [`FlowMap`] that dispatches to them.

use super::integrator::{flow_numeric, IntegratorConfig};
use crate::error::check_dim;
use crate::fields::{Activation, FieldKind, NamedField, VectorField};
use crate::linalg::expm;
use crate::{Error, Matrix, Result, Vector};

/// `e^{τA}x + (∫₀^τ e^{sA} ds) b`, via the exponential of the homogeneous
/// `(d+1) × (d+1)` matrix `τ [[A, b], [0, 0]]`.
pub fn flow_affine(a: &Matrix, b: &Vector, tau: f64, x: &Vector) -> Result<Vector> {
    check_dim(b.len(), x.len())?;
    check_dim(a.nrows(), x.len())?;
    check_dim(a.ncols(), x.len())?;
    let m = affine_flow_matrix(a, b, tau);
    Ok(apply_homogeneous(&m, x))
}

pub(crate) fn affine_flow_matrix(a: &Matrix, b: &Vector, tau: f64) -> Matrix {
    let d = b.len();
    let mut aug = Matrix::zeros(d + 1, d + 1);
    aug.view_mut((0, 0), (d, d)).copy_from(&(a * tau));
    aug.view_mut((0, d), (d, 1)).copy_from(&(b * tau));
    expm(&aug)
}

fn apply_homogeneous(m: &Matrix, x: &Vector) -> Vector {
    let d = x.len();
    m.view((0, 0), (d, d)) * x + m.view((0, d), (d, 1)).column(0)
}

/// Sign of the ReLU field whose flow is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReluSign {
    /// `ẋ = ReLU(x)`.
    Positive,
    /// `ẋ = −ReLU(x)`.
    Negative,
}

/// Leaky-ReLU flow: positive coordinates scale by `e^{±τ}`, the rest stay put.
pub fn flow_relu(sign: ReluSign, tau: f64, x: &Vector) -> Vector {
    let factor = match sign {
        ReluSign::Positive => tau.exp(),
        ReluSign::Negative => (-tau).exp(),
    };
    x.map(|v| if v > 0.0 { v * factor } else { v })
}

/// Flow of `ẋ = x²`: `x / (1 − τx)`, defined while `τx < 1`.
pub fn flow_mobius_1d(tau: f64, x: f64) -> Result<f64> {
    let product = tau * x;
    if product >= 1.0 {
        return Err(Error::PoleReached { product });
    }
    Ok(x / (1.0 - product))
}

/// A flow map `φ_f^t` prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct FlowMap {
    inner: MapKind,
}

#[derive(Debug, Clone)]
enum MapKind {
    Identity,
    Translation(Vector),
    Affine(Matrix),
    /// Per coordinate: `x > 0 ↦ x·pos`, `x ≤ 0 ↦ x·neg`.
    Piecewise {
        pos: Vec<f64>,
        neg: Vec<f64>,
    },
    /// Per active coordinate: `x ↦ x / (1 − c·x)`.
    Mobius {
        rate: Vec<f64>,
    },
    /// Flow of `(ReLU(x₂), ReLU(x₁))` for signed time.
    PermuteRelu {
        time: f64,
    },
    /// `x ↦ W⁻¹(φ(Wx + b) − b)`.
    Conjugated {
        inner: Matrix,
        inner_inv: Matrix,
        shift: Vector,
        base: Box<MapKind>,
    },
    Numeric {
        field: VectorField,
        time: f64,
        cfg: IntegratorConfig,
    },
}

impl FlowMap {
    /// Compiles `φ_f^t`; closed forms are used whenever the field kind has one,
    /// otherwise evaluation integrates numerically with `cfg`.
    pub fn new(field: &VectorField, t: f64, cfg: &IntegratorConfig) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::InvalidArgument("flow time must be finite".into()));
        }
        let inner = match closed_form(field, t) {
            Some(kind) => kind,
            None => {
                cfg.validate()?;
                MapKind::Numeric {
                    field: field.clone(),
                    time: t,
                    cfg: *cfg,
                }
            }
        };
        Ok(Self { inner })
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self.inner, MapKind::Numeric { .. })
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        self.inner.apply(x)
    }
}

/// `φ_f^t(x)`, closed form when available.
pub fn flow(field: &VectorField, t: f64, x: &Vector, cfg: &IntegratorConfig) -> Result<Vector> {
    check_dim(field.dim(), x.len())?;
    FlowMap::new(field, t, cfg)?.apply(x)
}

/// True when `φ_f^t` has a closed form in this crate.
pub fn has_closed_form(field: &VectorField) -> bool {
    closed_form(field, 1.0).is_some()
}

fn closed_form(field: &VectorField, t: f64) -> Option<MapKind> {
    if t == 0.0 {
        return Some(MapKind::Identity);
    }
    match field.kind() {
        FieldKind::Affine { a, b } => Some(affine_map(a, b, t)),
        FieldKind::Separable { act, active } => separable_closed_form(*act, active, t),
        FieldKind::Sum { terms } => {
            if let [(c, g)] = terms.as_slice() {
                return closed_form(g, c * t);
            }
            let mut a = Matrix::zeros(field.dim(), field.dim());
            let mut b = Vector::zeros(field.dim());
            for (c, g) in terms {
                match g.kind() {
                    FieldKind::Affine { a: ag, b: bg } => {
                        a += ag * *c;
                        b += bg * *c;
                    }
                    _ => return None,
                }
            }
            Some(affine_map(&a, &b, t))
        }
        FieldKind::Conjugated {
            outer,
            inner,
            shift,
            base,
        } => {
            // y = Wx + b satisfies ẏ = (S W)-scaled base(y) when S W = c I
            let d = field.dim();
            let sw = outer * inner;
            let c = sw.trace() / d as f64;
            let off = (&sw - Matrix::identity(d, d) * c).amax();
            if off > 1e-12 * c.abs().max(1.0) {
                return None;
            }
            let inner_inv = inner.clone().try_inverse()?;
            if c == 0.0 {
                return Some(MapKind::Identity);
            }
            let base = closed_form(base, c * t)?;
            Some(MapKind::Conjugated {
                inner: inner.clone(),
                inner_inv,
                shift: shift.clone(),
                base: Box::new(base),
            })
        }
        FieldKind::Named(NamedField::PermuteRelu) => Some(MapKind::PermuteRelu { time: t }),
        FieldKind::Named(_) | FieldKind::Marginal { .. } => None,
    }
}

fn affine_map(a: &Matrix, b: &Vector, t: f64) -> MapKind {
    if a.iter().all(|&v| v == 0.0) {
        MapKind::Translation(b * t)
    } else {
        MapKind::Affine(affine_flow_matrix(a, b, t))
    }
}

fn separable_closed_form(act: Activation, active: &[bool], t: f64) -> Option<MapKind> {
    let per = |on: bool, pos: f64, neg: f64| if on { (pos, neg) } else { (1.0, 1.0) };
    let factors: Option<Vec<(f64, f64)>> = match act {
        Activation::Relu => Some(active.iter().map(|&on| per(on, t.exp(), 1.0)).collect()),
        Activation::NegRelu => Some(active.iter().map(|&on| per(on, (-t).exp(), 1.0)).collect()),
        Activation::LeakyRelu { slope } => Some(
            active
                .iter()
                .map(|&on| per(on, t.exp(), (slope * t).exp()))
                .collect(),
        ),
        Activation::Quadratic1d | Activation::Monomial { power: 2 } => {
            return Some(MapKind::Mobius {
                rate: active.iter().map(|&on| if on { t } else { 0.0 }).collect(),
            })
        }
        _ => None,
    };
    factors.map(|fs| {
        let (pos, neg) = fs.into_iter().unzip();
        MapKind::Piecewise { pos, neg }
    })
}

impl MapKind {
    fn apply(&self, x: &Vector) -> Result<Vector> {
        match self {
            MapKind::Identity => Ok(x.clone()),
            MapKind::Translation(b) => {
                check_dim(b.len(), x.len())?;
                Ok(x + b)
            }
            MapKind::Affine(m) => {
                check_dim(m.nrows() - 1, x.len())?;
                Ok(apply_homogeneous(m, x))
            }
            MapKind::Piecewise { pos, neg } => {
                check_dim(pos.len(), x.len())?;
                Ok(Vector::from_iterator(
                    x.len(),
                    x.iter()
                        .zip(pos.iter().zip(neg))
                        .map(|(&v, (&p, &n))| if v > 0.0 { v * p } else { v * n }),
                ))
            }
            MapKind::Mobius { rate } => {
                check_dim(rate.len(), x.len())?;
                let mut out = x.clone();
                for (v, &c) in out.iter_mut().zip(rate) {
                    if c != 0.0 {
                        *v = flow_mobius_1d(c, *v)?;
                    }
                }
                Ok(out)
            }
            MapKind::Conjugated {
                inner,
                inner_inv,
                shift,
                base,
            } => {
                check_dim(shift.len(), x.len())?;
                let y = inner * x + shift;
                let z = base.apply(&y)?;
                Ok(inner_inv * (z - shift))
            }
            MapKind::PermuteRelu { time } => {
                check_dim(2, x.len())?;
                let (a, b) = permute_relu_flow(*time, x[0], x[1]);
                Ok(Vector::from_column_slice(&[a, b]))
            }
            MapKind::Numeric { field, time, cfg } => flow_numeric(field, *time, x, cfg),
        }
    }
}

/// `φ^t` of `(x₁, x₂) ↦ (ReLU(x₂), ReLU(x₁))`.
///
/// The closed quadrant `x ≤ 0` is fixed. With one positive coordinate the
/// other moves linearly at that speed; in the open positive quadrant
/// `x₁ + x₂` and `x₁ − x₂` scale by `e^{±t}`. Forward time can only enter
/// the positive quadrant and backward time can only leave it, so there is
/// at most one switch.
fn permute_relu_flow(t: f64, x1: f64, x2: f64) -> (f64, f64) {
    if t < 0.0 {
        return permute_relu_backward(-t, x1, x2);
    }
    match (x1 > 0.0, x2 > 0.0) {
        (false, false) => (x1, x2),
        (true, true) => quadrant_forward(t, x1, x2),
        (true, false) => {
            let hit = -x2 / x1;
            if hit >= t {
                (x1, x2 + x1 * t)
            } else {
                quadrant_forward(t - hit, x1, 0.0)
            }
        }
        (false, true) => {
            let hit = -x1 / x2;
            if hit >= t {
                (x1 + x2 * t, x2)
            } else {
                quadrant_forward(t - hit, 0.0, x2)
            }
        }
    }
}

fn quadrant_forward(t: f64, x1: f64, x2: f64) -> (f64, f64) {
    let (c, s) = (t.cosh(), t.sinh());
    (c * x1 + s * x2, s * x1 + c * x2)
}

/// `φ^{−t}` for `t ≥ 0`.
fn permute_relu_backward(t: f64, x1: f64, x2: f64) -> (f64, f64) {
    match (x1 > 0.0, x2 > 0.0) {
        (false, false) => (x1, x2),
        (true, false) => (x1, x2 - x1 * t),
        (false, true) => (x1 - x2 * t, x2),
        (true, true) => {
            let (u, v) = (x1 + x2, x1 - x2);
            if v == 0.0 {
                let k = (-t).exp();
                return (x1 * k, x2 * k);
            }
            // the smaller coordinate reaches 0 when u e^{−s} = |v| e^{s}
            let hit = 0.5 * (u / v.abs()).ln();
            if hit >= t {
                let (c, s) = (t.cosh(), t.sinh());
                return (c * x1 - s * x2, c * x2 - s * x1);
            }
            let lead = u * (-hit).exp();
            let rest = t - hit;
            if v > 0.0 {
                (lead, -lead * rest)
            } else {
                (-lead * rest, lead)
            }
        }
    }
}

/// `h(x) = A⁻¹ f(Ax + b)` as a conjugated field.
pub fn conjugated_field(f: &VectorField, a: &Matrix, b: &Vector) -> Result<VectorField> {
    let inv = invert(a)?;
    VectorField::conjugated(inv, a.clone(), b.clone(), f.clone())
}

fn invert(a: &Matrix) -> Result<Matrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let det = a.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularMatrix);
    }
    a.clone().try_inverse().ok_or(Error::SingularMatrix)
}

/// Flow of `h(x) = A⁻¹ f(Ax + b)` through the identity
/// `φ_h^τ(x) = A⁻¹(φ_f^τ(Ax + b) − b)`.
pub fn conjugated_flow(
    f: &VectorField,
    a: &Matrix,
    b: &Vector,
    tau: f64,
    x: &Vector,
    cfg: &IntegratorConfig,
) -> Result<Vector> {
    check_dim(f.dim(), x.len())?;
    check_dim(f.dim(), b.len())?;
    let inv = invert(a)?;
    let y = a * x + b;
    let z = flow(f, tau, &y, cfg)?;
    Ok(inv * (z - b))
}

/// Flow of `g(x) = s f(a x + b)` through
/// `φ_g^τ(x) = a⁻¹(φ_f^{a s τ}(a x + b) − b)`.
pub fn scaled_shift_flow(
    f: &VectorField,
    s: f64,
    a: f64,
    b: &Vector,
    tau: f64,
    x: &Vector,
    cfg: &IntegratorConfig,
) -> Result<Vector> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::InvalidArgument(
            "scale a must be finite and nonzero".into(),
        ));
    }
    check_dim(f.dim(), x.len())?;
    check_dim(f.dim(), b.len())?;
    let y = x * a + b;
    let z = flow(f, a * s * tau, &y, cfg)?;
    Ok((z - b) / a)
}

/// `g(x) = s f(a x + b)` as a conjugated field.
pub fn scaled_shift_field(f: &VectorField, s: f64, a: f64, b: &Vector) -> Result<VectorField> {
    let d = f.dim();
    VectorField::conjugated(
        Matrix::identity(d, d) * s,
        Matrix::identity(d, d) * a,
        b.clone(),
        f.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn affine_identity_and_translation() {
        let z = Matrix::zeros(2, 2);
        let x = v(&[0.3, -0.7]);
        assert_eq!(flow_affine(&z, &v(&[0.0, 0.0]), 7.0, &x).unwrap(), x);
        let y = flow_affine(&z, &v(&[1.0, 0.0]), 2.0, &v(&[0.0, 0.0])).unwrap();
        assert!((y - v(&[2.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn affine_decoupled_exponentials() {
        let a = Matrix::from_diagonal(&v(&[1.0, -1.0]));
        let y = flow_affine(&a, &v(&[0.0, 0.0]), 2f64.ln(), &v(&[1.0, 1.0])).unwrap();
        assert!((y - v(&[2.0, 0.5])).amax() < 1e-14);
    }

    #[test]
    fn relu_flow_examples() {
        let ln2 = 2f64.ln();
        let y = flow_relu(ReluSign::Positive, ln2, &v(&[1.0, -1.0]));
        assert!((y - v(&[2.0, -1.0])).amax() < 1e-15);
        assert_eq!(
            flow_relu(ReluSign::Positive, 0.0, &v(&[3.0, -2.0])),
            v(&[3.0, -2.0])
        );
        let y = flow_relu(ReluSign::Negative, ln2, &v(&[4.0, -3.0]));
        assert!((y - v(&[2.0, -3.0])).amax() < 1e-15);
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(flow_mobius_1d(0.5, 1.0).unwrap(), 2.0);
        assert_eq!(flow_mobius_1d(13.0, 0.0).unwrap(), 0.0);
        assert!(matches!(flow_mobius_1d(1.0, 1.0), Err(Error::PoleReached { .. })));
    }

    #[test]
    fn identity_conjugation_reproduces_base_flow() {
        let f = VectorField::relu(2).unwrap();
        let cfg = IntegratorConfig::default();
        let x = v(&[0.4, -0.2]);
        let base = flow(&f, 0.7, &x, &cfg).unwrap();
        let id = Matrix::identity(2, 2);
        let c = conjugated_flow(&f, &id, &v(&[0.0, 0.0]), 0.7, &x, &cfg).unwrap();
        assert!((base - c).amax() < 1e-15);
    }

    #[test]
    fn quarter_turn_broadcasts_first_axis_relu() {
        let f = VectorField::single_axis(Activation::Relu, 2, 0).unwrap();
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let h = conjugated_field(&f, &a, &v(&[0.0, 0.0])).unwrap();
        for x in [v(&[0.3, 1.2]), v(&[-2.0, -0.5]), v(&[1.0, -1.0])] {
            let y = h.eval(&x).unwrap();
            assert_eq!(y, v(&[0.0, x[1].max(0.0)]));
        }
    }

    #[test]
    fn singular_conjugation_is_rejected() {
        let f = VectorField::relu(2).unwrap();
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let r = conjugated_flow(
            &f,
            &a,
            &v(&[0.0, 0.0]),
            1.0,
            &v(&[1.0, 1.0]),
            &IntegratorConfig::default(),
        );
        assert!(matches!(r, Err(Error::SingularMatrix)));
    }

    #[test]
    fn scaled_shift_chase() {
        // g(x) = ReLU(2x): φ_g^{ln2/2}(1) = ½ e^{ln 2} · 2 = 2
        let f = VectorField::relu(1).unwrap();
        let cfg = IntegratorConfig::default();
        let tau = 2f64.ln() / 2.0;
        let y = scaled_shift_flow(&f, 1.0, 2.0, &v(&[0.0]), tau, &v(&[1.0]), &cfg).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-14);
        let g = scaled_shift_field(&f, 1.0, 2.0, &v(&[0.0])).unwrap();
        let n = flow_numeric(&g, tau, &v(&[1.0]), &cfg).unwrap();
        assert!((n[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn unit_scaling_is_identity_conjugation() {
        let f = VectorField::named(crate::fields::NamedField::Sinsum, 2).unwrap();
        let cfg = IntegratorConfig::with_steps(200);
        let x = v(&[0.2, 0.1]);
        let a = scaled_shift_flow(&f, 1.0, 1.0, &v(&[0.0, 0.0]), 0.5, &x, &cfg).unwrap();
        let b = flow_numeric(&f, 0.5, &x, &cfg).unwrap();
        assert!((a - b).amax() < 1e-15);
    }

    #[test]
    fn negative_time_closed_forms_invert_forward_ones() {
        let cfg = IntegratorConfig::default();
        let x = v(&[0.8, -0.4]);
        for f in [
            VectorField::relu(2).unwrap(),
            VectorField::elementwise(Activation::LeakyRelu { slope: 0.3 }, 2).unwrap(),
            VectorField::elementwise(Activation::Quadratic1d, 2).unwrap(),
        ] {
            let y = flow(&f, 0.6, &x, &cfg).unwrap();
            let back = flow(&f, -0.6, &y, &cfg).unwrap();
            assert!((back - &x).amax() < 1e-14, "{f:?}");
        }
    }

    #[test]
    fn permute_relu_closed_form_matches_rk4() {
        let f = VectorField::named(NamedField::PermuteRelu, 2).unwrap();
        let fine = IntegratorConfig::with_steps(20000);
        let pts = [
            [0.5, 0.3],
            [0.3, 0.5],
            [0.4, 0.4],
            [1.0, -0.5],
            [-0.5, 1.0],
            [2.0, -0.1],
            [-1.0, -2.0],
            [0.0, 0.7],
            [0.9, 0.0],
        ];
        for t in [0.8, -0.8, 2.0, -2.0] {
            let map = FlowMap::new(&f, t, &fine).unwrap();
            assert!(map.is_closed_form());
            for p in pts {
                let x = v(&p);
                let exact = map.apply(&x).unwrap();
                let num = flow_numeric(&f, t, &x, &fine).unwrap();
                assert!((&exact - &num).amax() < 1e-9, "t={t} x={p:?}: {exact} vs {num}");
            }
        }
    }

    #[test]
    fn permute_relu_flow_is_a_group() {
        let f = VectorField::named(NamedField::PermuteRelu, 2).unwrap();
        let cfg = IntegratorConfig::default();
        for p in [[1.0, -0.5], [0.5, 0.2], [-0.3, 0.8]] {
            let x = v(&p);
            let there = flow(&f, 1.3, &x, &cfg).unwrap();
            let back = flow(&f, -1.3, &there, &cfg).unwrap();
            assert!((back - &x).amax() < 1e-12);
            let split = flow(&f, 0.4, &flow(&f, 0.9, &x, &cfg).unwrap(), &cfg).unwrap();
            assert!((split - there).amax() < 1e-12);
        }
    }
}
