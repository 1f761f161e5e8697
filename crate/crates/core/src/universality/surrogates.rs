//! Builders that realize ReLU, broadcast activations and squeeze
//! profiles inside larger control families.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::fields::{AxisBox, NamedField};
use crate::flows::{FlowProgram, Leg};
use crate::{Activation, Error, Matrix, Result, Vector, VectorField};

/// `t ↦ a⁻¹ ln(1 + e^{at})` elementwise in `ℝ^dim`, and its exact sup
/// distance `ln 2 / a` from ReLU.
pub fn relu_from_softplus(a: f64, dim: usize) -> Result<(VectorField, f64)> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument("sharpness must be positive".into()));
    }
    let base = VectorField::elementwise(Activation::Softplus { sharpness: a }, dim)?;
    Ok((base.scaled(1.0 / a), std::f64::consts::LN_2 / a))
}

/// One atom `s · σ(a t + b)` of a ridge sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeTerm {
    pub coeff: f64,
    pub scale: f64,
    pub offset: f64,
}

/// A fitted `h(t) = Σ s_i σ(a_i t + b_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub activation: Activation,
    pub terms: Vec<RidgeTerm>,
    /// Max absolute deviation from ReLU on the fitting grid.
    pub residual: f64,
}

impl RidgeFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|r| r.coeff * self.activation.eval(r.scale * t + r.offset))
            .sum()
    }

    /// The sum applied elementwise in `ℝ^dim`.
    pub fn field(&self, dim: usize) -> Result<VectorField> {
        let base = VectorField::elementwise(self.activation, dim)?;
        let id = Matrix::identity(dim, dim);
        let terms = self
            .terms
            .iter()
            .map(|r| {
                let g = VectorField::conjugated(
                    id.clone(),
                    &id * r.scale,
                    Vector::from_element(dim, r.offset),
                    base.clone(),
                )?;
                Ok((r.coeff, g))
            })
            .collect::<Result<Vec<_>>>()?;
        VectorField::sum(terms)
    }
}

const FIT_GRID: usize = 401;

fn dictionary(domain: (f64, f64), act: Activation) -> Vec<(f64, f64)> {
    let (lo, hi) = domain;
    let width = hi - lo;
    let mut atoms = vec![(1.0, 0.0)];
    // constant atom: a = 0 at the offset where σ is largest in magnitude
    let offsets: Vec<f64> = (0..=16).map(|k| -2.0 + 0.25 * k as f64).collect();
    if let Some(&b) = offsets
        .iter()
        .max_by(|x, y| act.eval(**x).abs().total_cmp(&act.eval(**y).abs()))
    {
        atoms.push((0.0, b));
    }
    let centers: Vec<f64> = (0..=16).map(|k| lo + width * k as f64 / 16.0).collect();
    for k in 0..24 {
        let a = 0.02 * 1.4f64.powi(k) * 2.0 * std::f64::consts::PI / width.max(1e-12);
        for c in &centers {
            atoms.push((a, -a * c));
        }
        for b in [
            std::f64::consts::FRAC_PI_2,
            -std::f64::consts::FRAC_PI_2,
            1.0,
            -1.0,
        ] {
            atoms.push((a, b));
        }
    }
    atoms
}

/// Greedy ridge fit of ReLU on a 1-D box using atoms `σ(a t + b)`, `a ≥ 0`.
///
/// Atoms are chosen by orthogonal matching pursuit from a fixed dictionary;
/// coefficients are refit by least squares after each pick.
pub fn relu_from_sums(act: Activation, domain: &AxisBox, budget: usize, tol: f64) -> Result<RidgeFit> {
    act.validate()?;
    if domain.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: domain.dim(),
        });
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be positive".into()));
    }
    let (lo, hi) = (domain.lower()[0], domain.upper()[0]);
    let ts: Vec<f64> = (0..FIT_GRID)
        .map(|k| lo + (hi - lo) * k as f64 / (FIT_GRID - 1) as f64)
        .collect();
    let target = Vector::from_iterator(FIT_GRID, ts.iter().map(|t| t.max(0.0)));
    let atoms = dictionary((lo, hi), act);
    let columns: Vec<Vector> = atoms
        .iter()
        .map(|(a, b)| Vector::from_iterator(FIT_GRID, ts.iter().map(|t| act.eval(a * t + b))))
        .collect();
    let norms: Vec<f64> = columns.iter().map(|c| c.norm()).collect();

    let mut chosen: Vec<usize> = Vec::new();
    let mut coeffs = Vector::zeros(0);
    let mut residual = target.clone();
    let mut best = target.amax();
    while chosen.len() < budget {
        let pick = (0..atoms.len())
            .filter(|k| !chosen.contains(k) && norms[*k] > 1e-12)
            .max_by(|&i, &j| {
                let si = (columns[i].dot(&residual) / norms[i]).abs();
                let sj = (columns[j].dot(&residual) / norms[j]).abs();
                si.total_cmp(&sj)
            });
        let Some(k) = pick else { break };
        chosen.push(k);
        let m = Matrix::from_columns(&chosen.iter().map(|&i| columns[i].clone()).collect::<Vec<_>>());
        let svd = SVD::new(m.clone(), true, true);
        coeffs = svd
            .solve(&target, 1e-12 * svd.singular_values.max())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        residual = &target - &m * &coeffs;
        best = residual.amax();
        if best <= tol {
            break;
        }
    }
    if best > tol {
        return Err(Error::BudgetExceeded { best });
    }
    Ok(RidgeFit {
        activation: act,
        terms: chosen
            .iter()
            .zip(coeffs.iter())
            .map(|(&k, &s)| RidgeTerm {
                coeff: s,
                scale: atoms[k].0,
                offset: atoms[k].1,
            })
            .collect(),
        residual: best,
    })
}

/// Moves a single-axis field from axis `k` to axis `j` by conjugating with
/// the quarter turn `A` in the `(j, k)` plane, `A e_j = e_k`, `A e_k = −e_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Broadcast {
    pub rotation: Matrix,
    /// `A⁻¹ f(A x)`.
    pub field: VectorField,
    /// Generator `G` with `e^G = A`.
    generator: Matrix,
    source: VectorField,
}

impl Broadcast {
    /// `φ_h^τ = A⁻¹ ∘ φ_f^τ ∘ A` as three legs: rotate, flow, rotate back.
    pub fn program(&self, tau: f64) -> Result<FlowProgram> {
        let rot = VectorField::linear(self.generator.clone())?;
        FlowProgram::from_legs(
            self.field.dim(),
            vec![
                Leg::forward(rot.clone(), 1.0)?,
                Leg::forward(self.source.clone(), tau)?,
                Leg::backward(rot, 1.0)?,
            ],
        )
    }
}

/// Axes are 0-based.
pub fn broadcast_coordinate(f: &VectorField, k: usize, j: usize) -> Result<Broadcast> {
    let d = f.dim();
    if d < 2 {
        return Err(Error::AxisOutOfRange("broadcasting needs d >= 2".into()));
    }
    if k >= d || j >= d {
        return Err(Error::AxisOutOfRange(format!("axes {k}, {j} outside 0..{d}")));
    }
    if k == j {
        return Err(Error::AxisOutOfRange("source and target axis coincide".into()));
    }
    let mut a = Matrix::identity(d, d);
    a[(j, j)] = 0.0;
    a[(k, k)] = 0.0;
    a[(k, j)] = 1.0;
    a[(j, k)] = -1.0;
    let mut g = Matrix::zeros(d, d);
    g[(k, j)] = std::f64::consts::FRAC_PI_2;
    g[(j, k)] = -std::f64::consts::FRAC_PI_2;
    let field = VectorField::conjugated(a.transpose(), a.clone(), Vector::zeros(d), f.clone())?;
    Ok(Broadcast {
        rotation: a,
        field,
        generator: g,
        source: f.clone(),
    })
}

/// Fraction of the profile allowed outside `[−R, R]^{d−1}` by default.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

/// `f̄(x) = ∫_{[−R,R]^{d−1}} f(x₁, y) dy` with `nodes` trapezoid points per
/// axis. The tail is checked by comparing against the integral over
/// `[−2R, 2R]^{d−1}` at a few probe values of `x₁`.
pub fn marginalize(f: &VectorField, radius: f64, nodes: usize, tail_tol: f64) -> Result<VectorField> {
    let bar = VectorField::marginal(f.clone(), radius, nodes)?;
    if f.dim() == 1 {
        return Ok(bar);
    }
    let wide = VectorField::marginal(f.clone(), 2.0 * radius, 2 * nodes - 1)?;
    let d = f.dim();
    for k in 0..=4 {
        let x1 = -radius + radius * k as f64 / 2.0;
        let mut x = Vector::zeros(d);
        x[0] = x1;
        let a = bar.eval(&x)?;
        let b = wide.eval(&x)?;
        let tail = (a - &b).amax();
        if !(tail <= tail_tol * (1.0 + b.amax())) {
            return Err(Error::TailMassTooLarge { tail, tol: tail_tol });
        }
    }
    Ok(bar)
}

/// Trapezoid integral of the first component of a profile field along `x₁`.
pub fn profile_integral(profile: &VectorField, lo: f64, hi: f64, nodes: usize) -> Result<Vector> {
    if nodes < 2 {
        return Err(Error::InvalidArgument("need at least 2 nodes".into()));
    }
    let d = profile.dim();
    let h = (hi - lo) / (nodes - 1) as f64;
    let mut acc = Vector::zeros(d);
    for k in 0..nodes {
        let mut x = Vector::zeros(d);
        x[0] = lo + h * k as f64;
        let w = if k == 0 || k + 1 == nodes { 0.5 } else { 1.0 };
        acc += profile.eval(&x)? * (w * h);
    }
    Ok(acc)
}

/// `g_ε(x) = A_ε⁻¹ f̄(A_ε x)` with `A_ε = diag(1, 1/ε, …, 1/ε)`.
pub fn squeeze_conjugation(profile: &VectorField, eps: f64) -> Result<VectorField> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let d = profile.dim();
    let a = squeeze_matrix(d, eps);
    let a_inv = Matrix::from_diagonal(&a.diagonal().map(|v| 1.0 / v));
    VectorField::conjugated(a_inv, a, Vector::zeros(d), profile.clone())
}

/// `diag(1, 1/ε, …, 1/ε)`.
pub fn squeeze_matrix(dim: usize, eps: f64) -> Matrix {
    Matrix::from_diagonal(&Vector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { 1.0 / eps }))
}

/// `S ReLU(Ax + b) = Σ_{ij} s_ij f(P E_ij (Ax + b))` with `f` the
/// coordinate-swapping ReLU and `P` the swap, as a sum of four fields of the
/// form `f(A'x + b')`.
pub fn permute_relu_expansion(s: &Matrix, a: &Matrix, b: &Vector) -> Result<VectorField> {
    if s.shape() != (2, 2) || a.shape() != (2, 2) || b.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: b.len(),
        });
    }
    let f = VectorField::named(NamedField::PermuteRelu, 2)?;
    let p = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let mut terms = Vec::with_capacity(4);
    for i in 0..2 {
        for j in 0..2 {
            let mut e = Matrix::zeros(2, 2);
            e[(i, j)] = 1.0;
            let pe = &p * e;
            let g = VectorField::conjugated(Matrix::identity(2, 2), &pe * a, &pe * b, f.clone())?;
            terms.push((s[(i, j)], g));
        }
    }
    VectorField::sum(terms)
}
