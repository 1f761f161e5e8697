use crate::error::check_dim;
use crate::fields::VectorField;
use crate::flows::{FlowMap, FlowProgram, IntegratorConfig, Leg};
use crate::{Error, Result, Vector};

/// One step of a scheme applied `repeats` times.
#[derive(Debug, Clone)]
pub struct IteratedMap {
    dim: usize,
    step: Vec<FlowMap>,
    repeats: usize,
}

impl IteratedMap {
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        let mut y = x.clone();
        for _ in 0..self.repeats {
            for (i, m) in self.step.iter().enumerate() {
                y = m.apply(&y).map_err(|e| e.at_leg(i))?;
            }
        }
        Ok(y)
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    Ok(())
}

fn check_terms(terms: &[(f64, VectorField)]) -> Result<usize> {
    let dim = match terms.first() {
        Some((_, f)) => f.dim(),
        None => return Err(Error::InvalidArgument("splitting needs at least one term".into())),
    };
    for (a, f) in terms {
        if !(*a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "splitting weights must be positive, got {a}"
            )));
        }
        check_dim(dim, f.dim())?;
    }
    Ok(dim)
}

/// `(φ_{f_m}^{a_m τ/n} ∘ ⋯ ∘ φ_{f_1}^{a_1 τ/n})^{∘n}`, prepared for many points.
pub fn lie_trotter_map(
    terms: &[(f64, VectorField)],
    tau: f64,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<IteratedMap> {
    let dim = check_terms(terms)?;
    check_n(n)?;
    check_tau(tau)?;
    let step = terms
        .iter()
        .enumerate()
        .map(|(i, (a, f))| FlowMap::new(f, a * tau / n as f64, cfg).map_err(|e| e.at_leg(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(IteratedMap {
        dim,
        step,
        repeats: n,
    })
}

/// Lie–Trotter approximation of `φ_{Σ a_i f_i}^τ(x)`.
pub fn lie_trotter(
    terms: &[(f64, VectorField)],
    tau: f64,
    n: usize,
    x: &Vector,
    cfg: &IntegratorConfig,
) -> Result<Vector> {
    lie_trotter_map(terms, tau, n, cfg)?.apply(x)
}

/// The Lie–Trotter composition as an explicit program.
pub fn lie_trotter_program(terms: &[(f64, VectorField)], tau: f64, n: usize) -> Result<FlowProgram> {
    let dim = check_terms(terms)?;
    check_n(n)?;
    check_tau(tau)?;
    let mut p = FlowProgram::identity(dim)?;
    for _ in 0..n {
        for (a, f) in terms {
            p.push(Leg::forward(f.clone(), a * tau / n as f64)?)?;
        }
    }
    Ok(p)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scheme time must be finite and nonnegative, got {tau}"
        )));
    }
    Ok(())
}

/// `Ψ_Δt = φ_{f₂}^{h} ∘ φ_{f₁}^{h} ∘ φ_{−f₂}^{h} ∘ φ_{−f₁}^{h}` with
/// `h = √(τ/n)`, iterated `n` times.
pub fn commutator_map(
    f1: &VectorField,
    f2: &VectorField,
    tau: f64,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<IteratedMap> {
    check_dim(f1.dim(), f2.dim())?;
    check_n(n)?;
    check_tau(tau)?;
    let h = (tau / n as f64).sqrt();
    let legs = [f1.negated(), f2.negated(), f1.clone(), f2.clone()];
    let step = legs
        .iter()
        .enumerate()
        .map(|(i, f)| FlowMap::new(f, h, cfg).map_err(|e| e.at_leg(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(IteratedMap {
        dim: f1.dim(),
        step,
        repeats: n,
    })
}

/// `(Ψ_Δt)^{∘n}(x)`, an approximation of `φ_{[f₁,f₂]}^τ(x)`.
pub fn commutator_scheme(
    f1: &VectorField,
    f2: &VectorField,
    tau: f64,
    n: usize,
    x: &Vector,
    cfg: &IntegratorConfig,
) -> Result<Vector> {
    commutator_map(f1, f2, tau, n, cfg)?.apply(x)
}

/// `(Ψ_Δt)^{∘n}` as an explicit program; backward legs realize `−f₁`, `−f₂`.
pub fn commutator_program(f1: &VectorField, f2: &VectorField, tau: f64, n: usize) -> Result<FlowProgram> {
    check_dim(f1.dim(), f2.dim())?;
    check_n(n)?;
    check_tau(tau)?;
    let h = (tau / n as f64).sqrt();
    let mut p = FlowProgram::identity(f1.dim())?;
    for _ in 0..n {
        p.push(Leg::backward(f1.clone(), h)?)?;
        p.push(Leg::backward(f2.clone(), h)?)?;
        p.push(Leg::forward(f1.clone(), h)?)?;
        p.push(Leg::forward(f2.clone(), h)?)?;
    }
    Ok(p)
}
