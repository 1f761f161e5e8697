use super::domain::AxisBox;
use super::field::VectorField;
use crate::error::check_dim;
use crate::linalg::spectral_norm;
use crate::{Error, Matrix, Result, Vector};

/// Central-difference Jacobian with per-coordinate step `ε^{1/3}(1 + |x_i|)`.
pub fn jacobian_fd<F>(map: F, x: &Vector) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let d = x.len();
    let mut cols = Vec::with_capacity(d);
    let mut probe = x.clone();
    for i in 0..d {
        let h = f64::EPSILON.cbrt() * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let up = map(&probe)?;
        probe[i] = x[i] - h;
        let dn = map(&probe)?;
        probe[i] = x[i];
        cols.push((up - dn) / (2.0 * h));
    }
    let rows = cols.first().map(|c| c.len()).unwrap_or(0);
    Ok(Matrix::from_fn(rows, d, |r, c| cols[c][r]))
}

/// `∇·f(x) = tr ∇f(x)`.
pub fn divergence(f: &VectorField, x: &Vector) -> Result<f64> {
    Ok(f.jacobian(x)?.trace())
}

/// `[f, g](x) = ∇g(x) f(x) − ∇f(x) g(x)`.
pub fn lie_bracket(f: &VectorField, g: &VectorField, x: &Vector) -> Result<Vector> {
    check_dim(f.dim(), g.dim())?;
    let fx = f.eval(x)?;
    let gx = g.eval(x)?;
    Ok(g.jacobian(x)? * fx - f.jacobian(x)? * gx)
}

/// Sampled Lipschitz estimate: the largest spectral norm of `∇f` over the box
/// vertices, its center and the first `samples` Halton points. This is a lower
/// bound on the true constant, nondecreasing in `samples`.
pub fn lipschitz_estimate(f: &VectorField, domain: &AxisBox, samples: usize) -> Result<f64> {
    check_dim(f.dim(), domain.dim())?;
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "lipschitz_estimate needs samples >= 2".into(),
        ));
    }
    Ok(domain
        .probe_points(samples)
        .iter()
        .map(|x| spectral_norm(&f.jacobian_unchecked(x)))
        .fold(0.0, f64::max))
}

/// Largest Euclidean norm of `f` on the probe set of [`lipschitz_estimate`].
pub fn sup_norm_estimate(f: &VectorField, domain: &AxisBox, samples: usize) -> Result<f64> {
    check_dim(f.dim(), domain.dim())?;
    Ok(domain
        .probe_points(samples)
        .iter()
        .map(|x| f.eval_unchecked(x).norm())
        .fold(0.0, f64::max))
}

/// Outcome of [`slice_nonlinearity_test`].
#[derive(Debug, Clone, PartialEq)]
pub enum SliceVerdict {
    /// Every slice was affine within tolerance; carries the worst residual.
    Linear { max_residual: f64 },
    /// First shift whose slice is not affine.
    Nonlinear {
        shift_index: usize,
        shift: Vector,
        residual: f64,
    },
}

impl SliceVerdict {
    pub fn is_nonlinear(&self) -> bool {
        matches!(self, SliceVerdict::Nonlinear { .. })
    }
}

pub const SLICE_GRID: usize = 129;

/// Tests whether `t ↦ f_component(t e_direction + b)` is affine on `interval`
/// for each shift `b`, by a least-squares affine fit on a uniform grid.
///
/// The default tolerance is `1e−6 (range of sampled values + 1)` per slice.
pub fn slice_nonlinearity_test(
    f: &VectorField,
    component: usize,
    direction: usize,
    shifts: &[Vector],
    interval: (f64, f64),
    tol: Option<f64>,
) -> Result<SliceVerdict> {
    let d = f.dim();
    if component >= d || direction >= d {
        return Err(Error::AxisOutOfRange(format!(
            "component {component} / direction {direction} in dimension {d}"
        )));
    }
    if shifts.is_empty() {
        return Err(Error::InvalidArgument("at least one shift is required".into()));
    }
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(
            "slice interval must be nondegenerate".into(),
        ));
    }
    let ts: Vec<f64> = (0..SLICE_GRID)
        .map(|k| lo + (hi - lo) * k as f64 / (SLICE_GRID - 1) as f64)
        .collect();
    let mut worst = 0.0f64;
    for (idx, b) in shifts.iter().enumerate() {
        check_dim(d, b.len())?;
        let values: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let mut x = b.clone();
                x[direction] += t;
                f.eval_unchecked(&x)[component]
            })
            .collect();
        let residual = affine_fit_residual(&ts, &values);
        let range = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min);
        let threshold = tol.unwrap_or(1e-6 * (range + 1.0));
        if residual > threshold {
            return Ok(SliceVerdict::Nonlinear {
                shift_index: idx,
                shift: b.clone(),
                residual,
            });
        }
        worst = worst.max(residual);
    }
    Ok(SliceVerdict::Linear { max_residual: worst })
}

/// Max absolute residual of the least-squares line through `(t, y)`.
pub fn affine_fit_residual(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    ts.iter()
        .zip(ys)
        .map(|(t, y)| (y - (ym + slope * (t - tm))).abs())
        .fold(0.0, f64::max)
}

/// Component `i` is coordinate nonlinear when, for every direction `e_j`,
/// some shift makes the slice non-affine. Returns the first direction with no
/// nonlinear slice among `shifts`, or `None` when all directions pass.
pub fn coordinate_linear_direction(
    f: &VectorField,
    component: usize,
    shifts: &[Vector],
    interval: (f64, f64),
) -> Result<Option<usize>> {
    for direction in 0..f.dim() {
        let verdict = slice_nonlinearity_test(f, component, direction, shifts, interval, None)?;
        if !verdict.is_nonlinear() {
            return Ok(Some(direction));
        }
    }
    Ok(None)
}

/// Every component is coordinate nonlinear on the probed shifts.
pub fn is_fully_coordinate_nonlinear(
    f: &VectorField,
    shifts: &[Vector],
    interval: (f64, f64),
) -> Result<bool> {
    for component in 0..f.dim() {
        if coordinate_linear_direction(f, component, shifts, interval)?.is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}
