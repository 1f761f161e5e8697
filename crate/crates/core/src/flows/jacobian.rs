use std::io::Write;

use super::closed::FlowMap;
use super::integrator::{integrate_log_det, IntegratorConfig};
use super::program::FlowProgram;
use crate::error::check_dim;
use crate::{Error, Result, Vector, VectorField};

/// `det Dφ^t(x)` along a program's trajectory, at each time of `t_grid`.
///
/// Time runs through the legs back to back, so `t_grid` lives in
/// `[0, total_duration]`. The log-determinant obeys `d/dt ℓ = ∇·f` and is
/// integrated with RK4 alongside the state.
pub fn jacobian_det_along_flow(
    program: &FlowProgram,
    x: &Vector,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    Ok(log_det_along_flow(program, x, t_grid, cfg)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// As [`jacobian_det_along_flow`] but returns `log det`.
pub fn log_det_along_flow(
    program: &FlowProgram,
    x: &Vector,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    check_dim(program.dim(), x.len())?;
    cfg.validate()?;
    let total = program.total_duration();
    let tol = 1e-12 * (1.0 + total);
    for w in t_grid.windows(2) {
        if !(w[0] <= w[1]) {
            return Err(Error::InvalidArgument("time grid must be sorted".into()));
        }
    }
    if let (Some(&first), Some(&last)) = (t_grid.first(), t_grid.last()) {
        if !(first >= 0.0 && last <= total + tol) {
            return Err(Error::InvalidArgument(format!(
                "time grid must lie in [0, {total}]"
            )));
        }
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let mut next = 0;
    let mut state = x.clone();
    let mut log_det = 0.0;
    let mut start = 0.0;
    while next < t_grid.len() && t_grid[next] <= 0.0 {
        out.push(0.0);
        next += 1;
    }
    for (i, leg) in program.legs().iter().enumerate() {
        let end = start + leg.duration;
        let is_last = i + 1 == program.len();
        let mut marks = Vec::new();
        while next < t_grid.len() && (t_grid[next] <= end || is_last) {
            marks.push((t_grid[next] - start).clamp(0.0, leg.duration));
            next += 1;
        }
        let field = leg.effective_field();
        let (y, dl, recorded) = match exact_leg(&field, leg.duration, &state, &marks, cfg) {
            Some(done) => done,
            None => integrate_log_det(&field, leg.duration, &state, &marks, cfg),
        }
        .map_err(|e| e.at_leg(i))?;
        out.extend(recorded.into_iter().map(|r| log_det + r));
        state = y;
        log_det += dl;
        start = end;
    }
    // any remaining marks sit at the end of an empty program
    out.resize(t_grid.len(), log_det);
    Ok(out)
}

/// Closed-form flow with constant divergence `c`: `log det = c·t`. Only
/// used when no mark falls strictly inside the leg.
fn exact_leg(
    field: &VectorField,
    duration: f64,
    x: &Vector,
    marks: &[f64],
    cfg: &IntegratorConfig,
) -> Option<Result<(Vector, f64, Vec<f64>)>> {
    if marks.iter().any(|&m| m != 0.0 && m != duration) {
        return None;
    }
    let div = field.constant_divergence()?;
    let map = FlowMap::new(field, duration, cfg).ok()?;
    if !map.is_closed_form() {
        return None;
    }
    let dl = div * duration;
    Some(map.apply(x).map(|y| {
        let recorded = marks.iter().map(|&m| if m == 0.0 { 0.0 } else { dl }).collect();
        (y, dl, recorded)
    }))
}

/// `log det Dφ(x)` at the end of a program, with the closed-form legs
/// compiled once for repeated evaluation.
pub(crate) struct EndpointLogDet<'a> {
    program: &'a FlowProgram,
    exact: Vec<Option<(FlowMap, f64)>>,
    cfg: IntegratorConfig,
}

impl<'a> EndpointLogDet<'a> {
    pub(crate) fn new(program: &'a FlowProgram, cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let exact = program
            .legs()
            .iter()
            .map(|leg| {
                let field = leg.effective_field();
                let div = field.constant_divergence()?;
                let map = FlowMap::new(&field, leg.duration, cfg).ok()?;
                map.is_closed_form().then_some((map, div * leg.duration))
            })
            .collect();
        Ok(Self {
            program,
            exact,
            cfg: *cfg,
        })
    }

    pub(crate) fn eval(&self, x: &Vector) -> Result<f64> {
        check_dim(self.program.dim(), x.len())?;
        let mut state = x.clone();
        let mut log_det = 0.0;
        for (i, (leg, exact)) in self.program.legs().iter().zip(&self.exact).enumerate() {
            match exact {
                Some((map, dl)) => {
                    state = map.apply(&state).map_err(|e| e.at_leg(i))?;
                    log_det += dl;
                }
                None => {
                    let (y, dl, _) =
                        integrate_log_det(&leg.effective_field(), leg.duration, &state, &[], &self.cfg)
                            .map_err(|e| e.at_leg(i))?;
                    state = y;
                    log_det += dl;
                }
            }
        }
        Ok(log_det)
    }
}

/// Writes a `t,detJ` table.
pub fn write_det_csv<W: Write>(mut w: W, times: &[f64], dets: &[f64]) -> Result<()> {
    writeln!(w, "t,detJ")?;
    for (t, d) in times.iter().zip(dets) {
        writeln!(w, "{t},{d}")?;
    }
    Ok(())
}
