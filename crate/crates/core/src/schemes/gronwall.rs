use serde::{Deserialize, Serialize};

use crate::fields::{lipschitz_estimate, sup_norm_estimate, AxisBox, VectorField};
use crate::{Error, Result};

/// Sample budget for the `V` and `L` estimates.
pub const GRONWALL_SAMPLES: usize = 256;
const MAX_REFINEMENTS: usize = 32;

/// Flow-perturbation bound for `ẋ = f₁(x)` against any field within `δ` of
/// `f₁` on the inflated domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallBound {
    pub lipschitz: f64,
    /// `max ‖f₁‖` on the base domain.
    pub sup_norm: f64,
    pub tau: f64,
    pub delta: f64,
    /// `(V + 1) τ e^{Lτ}`.
    pub inflation_radius: f64,
    pub inflated: AxisBox,
    /// `δ (e^{Lτ} − 1) / L`, or `δτ` when `L = 0`.
    pub bound: f64,
}

/// `δ (e^{Lτ} − 1) / L` with its `L → 0` limit.
pub fn gronwall_factor(l: f64, tau: f64) -> f64 {
    let x = l * tau;
    if x.abs() < 1e-12 {
        tau
    } else {
        x.exp_m1() / l
    }
}

/// Computes `V` on `domain`, then `L` on the inflated box. Since the
/// inflation radius depends on `L`, the pair is refined until the estimate
/// stops changing.
pub fn gronwall_bound(f1: &VectorField, domain: &AxisBox, tau: f64, delta: f64) -> Result<GronwallBound> {
    crate::error::check_dim(f1.dim(), domain.dim())?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(
            "delta must be finite and nonnegative".into(),
        ));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(
            "tau must be finite and nonnegative".into(),
        ));
    }
    let v = sup_norm_estimate(f1, domain, GRONWALL_SAMPLES)?;
    let mut l = lipschitz_estimate(f1, domain, GRONWALL_SAMPLES)?;
    let mut radius = (v + 1.0) * tau * (l * tau).exp();
    let mut inflated = domain.inflate(radius)?;
    for _ in 0..MAX_REFINEMENTS {
        let next = lipschitz_estimate(f1, &inflated, GRONWALL_SAMPLES)?.max(l);
        let r = (v + 1.0) * tau * (next * tau).exp();
        let done = next <= l;
        l = next;
        radius = r;
        inflated = domain.inflate(radius)?;
        if done || !radius.is_finite() {
            break;
        }
    }
    if !radius.is_finite() {
        return Err(Error::InvalidArgument(
            "inflated domain is unbounded; Lipschitz estimate diverges".into(),
        ));
    }
    Ok(GronwallBound {
        lipschitz: l,
        sup_norm: v,
        tau,
        delta,
        inflation_radius: radius,
        inflated,
        bound: delta * gronwall_factor(l, tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Matrix, Vector};

    #[test]
    fn zero_delta_gives_zero_bound() {
        let f = VectorField::relu(2).unwrap();
        let b = gronwall_bound(&f, &AxisBox::cube(2, -1.0, 1.0).unwrap(), 1.0, 0.0).unwrap();
        assert_eq!(b.bound, 0.0);
    }

    #[test]
    fn relu_bound_uses_unit_lipschitz_constant() {
        let f = VectorField::relu(1).unwrap();
        let omega = AxisBox::cube(1, -1.0, 1.0).unwrap();
        let b = gronwall_bound(&f, &omega, 1.0, 0.01).unwrap();
        assert_eq!(b.lipschitz, 1.0);
        assert_eq!(b.sup_norm, 1.0);
        assert!((b.inflation_radius - 2.0 * std::f64::consts::E).abs() < 1e-12);
        assert!((b.bound - 0.01 * (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert_eq!(b.inflated.upper()[0], 1.0 + b.inflation_radius);
    }

    #[test]
    fn radius_formula_holds_for_computed_constants() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 2.0, -1.0, 0.5]);
        let f = VectorField::affine(a, Vector::from_vec(vec![0.5, 0.0])).unwrap();
        let b = gronwall_bound(&f, &AxisBox::cube(2, -1.0, 2.0).unwrap(), 0.7, 0.1).unwrap();
        let want = (b.sup_norm + 1.0) * b.tau * (b.lipschitz * b.tau).exp();
        assert!((b.inflation_radius - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn zero_lipschitz_limit() {
        assert_eq!(gronwall_factor(0.0, 2.5), 2.5);
        assert!((gronwall_factor(1e-9, 2.0) - 2.0).abs() < 1e-8);
    }
}
