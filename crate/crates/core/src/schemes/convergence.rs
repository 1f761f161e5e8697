use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::fields::AxisBox;
use crate::{Error, Result, Vector};

/// Size of the fixed Halton point set errors are measured on.
pub const MEASURE_POINTS: usize = 64;

/// Measured errors of a scheme for a range of step counts, and the fitted
/// order in `Δt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scheme: String,
    pub reference: String,
    pub tau: f64,
    pub n_values: Vec<usize>,
    pub dt: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log Δt` over `window`.
    pub slope: f64,
    pub slope_stderr: f64,
    /// The step counts that entered the fit.
    pub window: Vec<usize>,
    /// True when the error strictly decreases as `n` grows.
    pub monotone: bool,
}

impl ConvergenceReport {
    pub fn slope_within(&self, target: f64, tol: f64) -> bool {
        (self.slope - target).abs() <= tol
    }

    /// Writes the `n,dt,error` table.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,dt,error")?;
        for ((n, dt), e) in self.n_values.iter().zip(&self.dt).zip(&self.errors) {
            writeln!(w, "{n},{dt},{e}")?;
        }
        Ok(())
    }
}

/// Fits the order of `runs = [(n, error)]` with `Δt = τ/n`.
///
/// Runs are sorted by `n`; the fit uses the largest half of the step counts,
/// but never fewer than three so a standard error exists.
pub fn fit_convergence(
    scheme: &str,
    reference: &str,
    tau: f64,
    runs: &[(usize, f64)],
) -> Result<ConvergenceReport> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument("tau must be positive".into()));
    }
    let mut runs = runs.to_vec();
    runs.sort_by_key(|r| r.0);
    let mut distinct = runs.iter().map(|r| r.0).collect::<Vec<_>>();
    distinct.dedup();
    if distinct.len() != runs.len() || runs.iter().any(|r| r.0 == 0) {
        return Err(Error::InvalidArgument(
            "step counts must be distinct and positive".into(),
        ));
    }
    if runs.len() < 4 {
        return Err(Error::TooFewSamples {
            needed: 4,
            got: runs.len(),
        });
    }
    if let Some(&(_, e)) = runs.iter().find(|r| !(r.1 > 0.0) || !r.1.is_finite()) {
        return Err(Error::NonPositiveError(e));
    }
    let k = runs.len();
    let width = k.div_ceil(2).max(3);
    let window = &runs[k - width..];
    let xs: Vec<f64> = window.iter().map(|(n, _)| (tau / *n as f64).ln()).collect();
    let ys: Vec<f64> = window.iter().map(|(_, e)| e.ln()).collect();
    let (slope, stderr) = least_squares_slope(&xs, &ys);
    Ok(ConvergenceReport {
        scheme: scheme.to_string(),
        reference: reference.to_string(),
        tau,
        n_values: runs.iter().map(|r| r.0).collect(),
        dt: runs.iter().map(|r| tau / r.0 as f64).collect(),
        errors: runs.iter().map(|r| r.1).collect(),
        slope,
        slope_stderr: stderr,
        window: window.iter().map(|r| r.0).collect(),
        monotone: runs.windows(2).all(|w| w[1].1 < w[0].1),
    })
}

/// Ordinary least squares `y ≈ α + βx`; returns `(β, se(β))`.
fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - alpha - beta * x).powi(2))
        .sum();
    let se = if xs.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (beta, se)
}

/// `max_x ‖approx(x) − exact(x)‖_∞` over the first [`MEASURE_POINTS`] Halton
/// points of `domain`.
pub fn sup_error<A, E>(domain: &AxisBox, approx: A, exact: E) -> Result<f64>
where
    A: Fn(&Vector) -> Result<Vector>,
    E: Fn(&Vector) -> Result<Vector>,
{
    sup_error_on(&domain.halton_points(MEASURE_POINTS), approx, exact)
}

pub fn sup_error_on<A, E>(points: &[Vector], approx: A, exact: E) -> Result<f64>
where
    A: Fn(&Vector) -> Result<Vector>,
    E: Fn(&Vector) -> Result<Vector>,
{
    let mut worst = 0.0f64;
    for x in points {
        let d = (approx(x)? - exact(x)?).amax();
        if d.is_nan() {
            return Err(Error::InvalidArgument("NaN in scheme output".into()));
        }
        worst = worst.max(d);
    }
    Ok(worst)
}

/// `8·2^k` for `k = 0..count`.
pub fn doubling_grid(count: usize) -> Vec<usize> {
    (0..count).map(|k| 8usize << k).collect()
}
