use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::fields::VectorField;
use crate::{Error, Result, Vector};

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub steps_per_unit: u32,
    /// Any stage state with a larger Euclidean norm aborts integration.
    pub guard_radius: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            steps_per_unit: 1000,
            guard_radius: 1e6,
        }
    }
}

impl IntegratorConfig {
    pub fn with_steps(steps_per_unit: u32) -> Self {
        Self {
            steps_per_unit,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_unit == 0 {
            return Err(Error::InvalidArgument("steps_per_unit must be >= 1".into()));
        }
        if !(self.guard_radius > 0.0) {
            return Err(Error::InvalidArgument("guard_radius must be positive".into()));
        }
        Ok(())
    }

    /// `ceil(|τ| · steps_per_unit)`, at least 1 for nonzero `τ`.
    pub fn steps_for(&self, tau: f64) -> usize {
        if tau == 0.0 {
            0
        } else {
            ((tau.abs() * self.steps_per_unit as f64).ceil() as usize).max(1)
        }
    }
}

fn guard(x: &Vector, cfg: &IntegratorConfig, time: f64) -> Result<()> {
    let n = x.norm();
    if n.is_finite() && n <= cfg.guard_radius {
        Ok(())
    } else {
        Err(Error::BlowUpGuard {
            radius: cfg.guard_radius,
            time,
        })
    }
}

/// Classical RK4 for `ẋ = sign(τ) f(x)` over `|τ|` with
/// `ceil(|τ| · steps_per_unit)` equal steps.
pub fn flow_numeric(f: &VectorField, tau: f64, x: &Vector, cfg: &IntegratorConfig) -> Result<Vector> {
    check_dim(f.dim(), x.len())?;
    cfg.validate()?;
    if !tau.is_finite() {
        return Err(Error::InvalidArgument("flow time must be finite".into()));
    }
    let n = cfg.steps_for(tau);
    let mut state = x.clone();
    if n == 0 {
        return Ok(state);
    }
    let sign = tau.signum();
    let h = tau.abs() / n as f64;
    guard(&state, cfg, 0.0)?;
    for step in 0..n {
        let t = step as f64 * h;
        state = rk4_step(f, sign, h, &state, cfg, t)?;
    }
    Ok(state)
}

fn rk4_step(
    f: &VectorField,
    sign: f64,
    h: f64,
    x: &Vector,
    cfg: &IntegratorConfig,
    t: f64,
) -> Result<Vector> {
    let k1 = f.eval_unchecked(x) * sign;
    let s2 = x + &k1 * (0.5 * h);
    guard(&s2, cfg, t + 0.5 * h)?;
    let k2 = f.eval_unchecked(&s2) * sign;
    let s3 = x + &k2 * (0.5 * h);
    guard(&s3, cfg, t + 0.5 * h)?;
    let k3 = f.eval_unchecked(&s3) * sign;
    let s4 = x + &k3 * h;
    guard(&s4, cfg, t + h)?;
    let k4 = f.eval_unchecked(&s4) * sign;
    let next = x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    guard(&next, cfg, t + h)?;
    Ok(next)
}

/// RK4 on the augmented system `ẋ = f(x)`, `ℓ̇ = ∇·f(x)` (Liouville), forward
/// in time. `marks` are increasing offsets in `[0, duration]`; the returned
/// vector holds `ℓ` at each mark (the caller adds the starting value).
pub(crate) fn integrate_log_det(
    f: &VectorField,
    duration: f64,
    x: &Vector,
    marks: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vector, f64, Vec<f64>)> {
    let mut state = x.clone();
    let mut log_det = 0.0;
    let mut recorded = Vec::with_capacity(marks.len());
    let mut now = 0.0;
    let stops = marks.iter().cloned().chain(std::iter::once(duration));
    for (k, stop) in stops.enumerate() {
        let span = stop - now;
        let n = cfg.steps_for(span);
        if n > 0 {
            let h = span / n as f64;
            for step in 0..n {
                let t = now + step as f64 * h;
                let (next, dl) = rk4_step_log_det(f, h, &state, cfg, t)?;
                state = next;
                log_det += dl;
            }
        }
        now = stop;
        if k < marks.len() {
            recorded.push(log_det);
        }
    }
    Ok((state, log_det, recorded))
}

fn rk4_step_log_det(
    f: &VectorField,
    h: f64,
    x: &Vector,
    cfg: &IntegratorConfig,
    t: f64,
) -> Result<(Vector, f64)> {
    let div = |y: &Vector| f.jacobian_unchecked(y).trace();
    let k1 = f.eval_unchecked(x);
    let d1 = div(x);
    let s2 = x + &k1 * (0.5 * h);
    guard(&s2, cfg, t + 0.5 * h)?;
    let k2 = f.eval_unchecked(&s2);
    let d2 = div(&s2);
    let s3 = x + &k2 * (0.5 * h);
    guard(&s3, cfg, t + 0.5 * h)?;
    let k3 = f.eval_unchecked(&s3);
    let d3 = div(&s3);
    let s4 = x + &k3 * h;
    guard(&s4, cfg, t + h)?;
    let k4 = f.eval_unchecked(&s4);
    let d4 = div(&s4);
    let next = x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    guard(&next, cfg, t + h)?;
    Ok((next, (d1 + 2.0 * (d2 + d3) + d4) * (h / 6.0)))
}
