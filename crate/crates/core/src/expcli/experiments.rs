//! One function per experiment kind, plus the seeded generators they share
//! with the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{
    affine_bracket, ApproxReluSpec, ConvergenceSpec, CounterexampleSpec, ExperimentConfig, GronwallSpec,
    InterpolateSpec, RandomProblem, RankSpec, ReferenceKind, SchemeSpec, VerdictName,
};
use super::runner::{Artifacts, RunError};
use crate::fields::{jacobian_fd, VectorField};
use crate::flows::{
    flow, flow_numeric, jacobian_det_along_flow, volume_comparison, volume_comparison_map, FlowMap, Leg,
    Region,
};
use crate::schemes::{commutator_map, fit_convergence, gronwall_bound, lie_trotter_map, MEASURE_POINTS};
use crate::universality::{
    interpolate as interpolate_problem, relu_from_softplus, relu_from_sums, span_certificate,
    InterpolationProblem, SpanSampler, SpanVerdict,
};
use crate::{Error, FlowProgram, IntegratorConfig, Matrix, Result, Vector};

// Stream offsets keep generator draws apart from per-sample Monte Carlo
// streams, which use small indices.
const PROGRAM_STREAMS: u64 = 1 << 63;
const CONFIG_STREAM: u64 = 1 << 62;
const TRIAL_STREAMS: u64 = 1 << 61;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// A random program in `F_ass(f)` of `legs` legs: even legs flow `±f`, odd
/// legs a random affine field with entries in `[−1, 1]`; durations lie in
/// `[0.2, 1]`.
pub fn random_ass_program(f: &VectorField, legs: usize, seed: u64, index: u64) -> Result<FlowProgram> {
    let d = f.dim();
    let mut r = rng(seed, PROGRAM_STREAMS | index);
    let mut out = Vec::with_capacity(legs);
    for j in 0..legs {
        let duration = r.gen_range(0.2..=1.0);
        if j % 2 == 0 {
            if r.gen_bool(0.5) {
                out.push(Leg::forward(f.clone(), duration)?);
            } else {
                out.push(Leg::backward(f.clone(), duration)?);
            }
        } else {
            let a = Matrix::from_fn(d, d, |_, _| r.gen_range(-1.0..=1.0));
            let b = Vector::from_fn(d, |_, _| r.gen_range(-1.0..=1.0));
            out.push(Leg::forward(VectorField::affine(a, b)?, duration)?);
        }
    }
    FlowProgram::from_legs(d, out)
}

/// `n` points whose coordinates all increase strictly with the point index,
/// each drawn from `[−2, 2]`.
pub fn increasing_configuration(n: usize, dim: usize, seed: u64) -> Result<Vec<Vector>> {
    let mut r = rng(seed, CONFIG_STREAM);
    let mut axes = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut xs: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DegenerateConfiguration("repeated coordinate".into()));
        }
        axes.push(xs);
    }
    Ok((0..n).map(|i| Vector::from_fn(dim, |k, _| axes[k][i])).collect())
}

/// Sources and targets uniform in `[−scale, scale]^dim`; in one dimension
/// both are sorted so the data are order preserving.
pub fn random_problem(spec: &RandomProblem, seed: u64, tolerance: f64) -> Result<InterpolationProblem> {
    let mut r = rng(seed, CONFIG_STREAM);
    let draw = |r: &mut ChaCha8Rng| -> Vec<Vector> {
        (0..spec.n)
            .map(|_| Vector::from_fn(spec.dim, |_, _| r.gen_range(-spec.scale..spec.scale)))
            .collect()
    };
    let mut xs = draw(&mut r);
    let mut ys = draw(&mut r);
    if spec.dim == 1 {
        xs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        ys.sort_by(|a, b| a[0].total_cmp(&b[0]));
    }
    InterpolationProblem::new(xs, ys, tolerance)
}

fn header(config: &ExperimentConfig, art: &Artifacts) -> serde_json::Value {
    json!({
        "name": config.name,
        "kind": config.experiment.kind(),
        "config_digest": art.digest(),
        "seed": config.seed,
    })
}

fn with(mut base: serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    if let (Some(b), serde_json::Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

pub(crate) fn convergence(
    config: &ExperimentConfig,
    s: &ConvergenceSpec,
    art: &mut Artifacts,
) -> std::result::Result<(), RunError> {
    let (scheme, target) = match &s.scheme {
        SchemeSpec::LieTrotter { terms } => {
            let pairs: Vec<(f64, VectorField)> = terms.iter().map(|t| (t.coeff, t.field.clone())).collect();
            let target = match &s.target {
                Some(t) => t.clone(),
                None => VectorField::sum(pairs)?,
            };
            ("lie_trotter", target)
        }
        SchemeSpec::Commutator { f1, f2 } => {
            let target = match &s.target {
                Some(t) => t.clone(),
                None => affine_bracket(f1, f2).ok_or_else(|| {
                    RunError::Config(vec![super::Diagnostic::new(
                        "target",
                        "cannot derive the bracket",
                    )])
                })?,
            };
            ("commutator", target)
        }
    };
    let ref_cfg = IntegratorConfig {
        steps_per_unit: s.reference_steps_per_unit,
        guard_radius: s.integrator.guard_radius,
    };
    let points = s.domain.halton_points(MEASURE_POINTS);
    let (ref_name, exact) = match s.reference {
        ReferenceKind::Numeric => (
            "numeric",
            points
                .iter()
                .map(|x| flow_numeric(&target, s.tau, x, &ref_cfg))
                .collect::<Result<Vec<_>>>()?,
        ),
        ReferenceKind::Auto => {
            let map = FlowMap::new(&target, s.tau, &ref_cfg)?;
            let name = if map.is_closed_form() {
                "closed_form"
            } else {
                "numeric"
            };
            (
                name,
                points.iter().map(|x| map.apply(x)).collect::<Result<Vec<_>>>()?,
            )
        }
    };
    let mut ns = s.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut runs = Vec::with_capacity(ns.len());
    for &n in &ns {
        let map = match &s.scheme {
            SchemeSpec::LieTrotter { terms } => {
                let pairs: Vec<(f64, VectorField)> =
                    terms.iter().map(|t| (t.coeff, t.field.clone())).collect();
                lie_trotter_map(&pairs, s.tau, n, &s.integrator)?
            }
            SchemeSpec::Commutator { f1, f2 } => commutator_map(f1, f2, s.tau, n, &s.integrator)?,
        };
        let mut worst = 0.0f64;
        for (x, e) in points.iter().zip(&exact) {
            worst = worst.max((map.apply(x)? - e).amax());
        }
        runs.push((n, worst));
    }
    let report = fit_convergence(scheme, ref_name, s.tau, &runs)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let text = String::from_utf8(csv).expect("ascii csv");
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default().to_string();
    art.csv("convergence.csv", &head, lines.map(str::to_string))?;
    let within = s.expect.map(|e| report.slope_within(e.slope, e.tol));
    art.json(
        "report.json",
        &with(
            header(config, art),
            json!({ "report": report, "expect": s.expect, "slope_within_expectation": within }),
        ),
    )?;
    art.say(format!(
        "{scheme} vs {ref_name}: slope {:.4} ± {:.4} over n = {:?}",
        report.slope, report.slope_stderr, report.window
    ));
    match (within, s.expect) {
        (Some(false), Some(e)) => Err(RunError::Tolerance(format!(
            "slope {} outside {} ± {}",
            report.slope, e.slope, e.tol
        ))),
        _ => Ok(()),
    }
}

pub(crate) fn interpolate(
    config: &ExperimentConfig,
    s: &InterpolateSpec,
    seed: u64,
    art: &mut Artifacts,
) -> std::result::Result<(), RunError> {
    let family = s
        .family()
        .ok_or_else(|| RunError::Config(vec![super::Diagnostic::new("field", "missing base field")]))?;
    let problem = match (&s.problem, &s.random) {
        (Some(p), _) => p.clone(),
        (None, Some(r)) => random_problem(r, seed, s.tolerance)?,
        (None, None) => unreachable!("validated"),
    };
    let it = interpolate_problem(&problem, &family)?;
    let compiled = it.program.compile(&IntegratorConfig::default())?;
    let mut rows = Vec::with_capacity(problem.len());
    for (i, (x, y)) in problem.sources().iter().zip(problem.targets()).enumerate() {
        rows.push(format!("{i},{}", (compiled.apply(x)? - y).norm()));
    }
    art.json("program.json", &it.program)?;
    art.csv("residuals.csv", "point,residual", rows)?;
    art.json(
        "report.json",
        &with(
            header(config, art),
            json!({
                "family": family.name(),
                "points": problem.len(),
                "dim": problem.dim(),
                "tolerance": problem.tolerance(),
                "residual": it.residual,
                "legs": it.program.len(),
                "stage_legs": it.stage_legs,
            }),
        ),
    )?;
    art.say(format!(
        "interpolated {} pairs in d = {} with {} legs, residual {:e}",
        problem.len(),
        problem.dim(),
        it.program.len(),
        it.residual
    ));
    Ok(())
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = match w.iter().find(|v| v.abs() > 1e-12) {
        Some(v) if *v < 0.0 => -1.0,
        _ => 1.0,
    };
    w.iter().map(|v| sign * v / norm).collect()
}

pub(crate) fn rank(
    config: &ExperimentConfig,
    s: &RankSpec,
    seed: u64,
    art: &mut Artifacts,
) -> std::result::Result<(), RunError> {
    let d = s.field.dim();
    let points = match (&s.points, s.random_points) {
        (Some(pts), _) => pts.iter().map(|p| Vector::from_column_slice(p)).collect(),
        (None, Some(n)) => increasing_configuration(n, d, seed)?,
        (None, None) => unreachable!("validated"),
    };
    let sampler = SpanSampler {
        count: s.samples,
        seed,
    };
    let cert = span_certificate(&s.field, s.family, &points, sampler, s.threshold)?;
    let mut csv = Vec::new();
    cert.write_singular_values_csv(&mut csv)?;
    let text = String::from_utf8(csv).expect("ascii csv");
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default().to_string();
    art.csv("singular_values.csv", &head, lines.map(str::to_string))?;
    let verdict = if cert.is_full_rank() {
        "full_rank"
    } else {
        "deficient"
    };
    let witness = cert.witness().map(|w| w.iter().cloned().collect::<Vec<f64>>());
    art.json(
        "certificate.json",
        &with(
            header(config, art),
            json!({
                "field": s.field,
                "family": s.family,
                "configuration": cert.configuration,
                "threshold": cert.threshold,
                "singular_values": cert.singular_values,
                "rank": cert.rank(),
                "columns": cert.singular_values.len(),
                "verdict": verdict,
                "witness": witness,
            }),
        ),
    )?;
    art.say(format!(
        "verdict: {verdict} (rank {} of {})",
        cert.rank(),
        cert.singular_values.len()
    ));
    if let Some(w) = &witness {
        let shown: Vec<String> = w
            .iter()
            .map(|&v| format!("{:.6}", if v.abs() < 5e-7 { 0.0 } else { v }))
            .collect();
        art.say(format!("witness: [{}]", shown.join(", ")));
    }
    if let Some(e) = &s.expect {
        let got = match cert.verdict {
            SpanVerdict::FullRank => VerdictName::FullRank,
            SpanVerdict::Deficient { .. } => VerdictName::Deficient,
        };
        if got != e.verdict {
            return Err(RunError::Tolerance(format!(
                "expected {:?}, got {verdict}",
                e.verdict
            )));
        }
        if let (Some(want), Some(w)) = (&e.witness, &witness) {
            let want = normalized(want);
            let gap = want.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if !(gap <= e.tol) {
                return Err(RunError::Tolerance(format!(
                    "witness is {gap:e} from the expected one, tolerance {}",
                    e.tol
                )));
            }
        }
    }
    Ok(())
}

/// `(max − min) / |mean|`.
fn relative_spread(xs: &[f64]) -> f64 {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (hi - lo) / mean.abs()
}

/// Equal-radius disks give `vol g(Ω₂) / vol g(Ω₁) = e^{c₂₁ − c₁₁}` for
/// `g(x) = (e^{x₁}, x₂, …)`.
fn expected_target_ratio(regions: &[Region; 2]) -> Option<f64> {
    match regions {
        [Region::Disk {
            center: c1,
            radius: r1,
        }, Region::Disk {
            center: c2,
            radius: r2,
        }] if r1 == r2 => Some((c2[0] - c1[0]).exp()),
        _ => None,
    }
}

pub(crate) fn counterexample(
    config: &ExperimentConfig,
    s: &CounterexampleSpec,
    seed: u64,
    art: &mut Artifacts,
) -> std::result::Result<(), RunError> {
    let base = s.domain.halton_points(s.base_points);
    let [r1, r2] = &s.regions;
    let mut det_rows = Vec::new();
    let mut vol_rows = Vec::new();
    let mut per_program = Vec::new();
    let mut worst_spread = 0.0f64;
    let mut all_agree = true;
    let sigmas = s.expect.map(|e| e.sigmas).unwrap_or(3.0);
    for k in 0..s.programs {
        let program = random_ass_program(&s.field, s.legs, seed, k as u64)?;
        let compiled = program.compile(&s.integrator)?;
        let total = [program.total_duration()];
        let mut liouville = Vec::with_capacity(base.len());
        let mut fd = Vec::with_capacity(base.len());
        for (i, x) in base.iter().enumerate() {
            let dl = jacobian_det_along_flow(&program, x, &total, &s.integrator)?[0];
            let df = jacobian_fd(|y| compiled.apply(y), x)?.determinant();
            det_rows.push(format!("{k},{i},{dl},{df}"));
            liouville.push(dl);
            fd.push(df);
        }
        let spread = relative_spread(&fd);
        worst_spread = worst_spread.max(spread);
        let (v1, v2) = volume_comparison(&program, [r1, r2], s.samples, seed, &s.integrator)?;
        let agree = v1.agrees_with(&v2, sigmas);
        all_agree &= agree;
        for (j, v) in [v1, v2].iter().enumerate() {
            vol_rows.push(format!("{k},{j},{},{}", v.value, v.std_error));
        }
        per_program.push(json!({
            "program": k,
            "legs": program.len(),
            "det_liouville_spread": relative_spread(&liouville),
            "det_fd_spread": spread,
            "volumes": [v1, v2],
            "volumes_agree": agree,
        }));
    }
    let g = |x: &Vector| -> Result<Vector> {
        let mut y = x.clone();
        y[0] = x[0].exp();
        Ok(y)
    };
    let (g1, g2) = volume_comparison_map(g, [r1, r2], s.samples, seed)?;
    for (j, v) in [g1, g2].iter().enumerate() {
        vol_rows.push(format!("target,{j},{},{}", v.value, v.std_error));
    }
    let (ratio, ratio_se) = g2.ratio(&g1);
    let expected = expected_target_ratio(&s.regions);
    let target_ok = expected.map(|e| (ratio - e).abs() <= sigmas * ratio_se);
    art.csv("det_j.csv", "program,point,detJ,detJ_fd", det_rows)?;
    art.csv("volumes.csv", "program,region,volume,std_error", vol_rows)?;
    art.json(
        "report.json",
        &with(
            header(config, art),
            json!({
                "programs": per_program,
                "max_det_spread": worst_spread,
                "all_volumes_agree": all_agree,
                "target": {
                    "volumes": [g1, g2],
                    "ratio": ratio,
                    "ratio_std_error": ratio_se,
                    "expected_ratio": expected,
                    "within": target_ok,
                },
            }),
        ),
    )?;
    art.say(format!(
        "{} programs: det spread <= {worst_spread:e}, volumes agree: {all_agree}",
        s.programs
    ));
    art.say(format!(
        "target volume ratio {ratio} ± {ratio_se} (expected {expected:?})"
    ));
    if let Some(e) = s.expect {
        if !(worst_spread <= e.det_spread) {
            return Err(RunError::Tolerance(format!(
                "det spread {worst_spread:e} above {}",
                e.det_spread
            )));
        }
        if !all_agree || target_ok == Some(false) {
            return Err(RunError::Tolerance(format!(
                "volume comparison outside {} standard errors",
                e.sigmas
            )));
        }
    }
    Ok(())
}

/// `max_t ‖g(t·1) − ReLU(t·1)‖` over a grid through `0` wide enough to hold
/// the whole transition.
fn softplus_deviation(g: &VectorField, a: f64) -> Result<f64> {
    let d = g.dim();
    let half = 2000;
    let width = 40.0 / a;
    let mut worst = 0.0f64;
    for k in -half..=half {
        let t = width * k as f64 / half as f64;
        let x = Vector::from_element(d, t);
        let relu = x.map(|v| v.max(0.0));
        worst = worst.max((g.eval(&x)? - relu).norm());
    }
    Ok(worst)
}

pub(crate) fn approx_relu(
    config: &ExperimentConfig,
    s: &ApproxReluSpec,
    art: &mut Artifacts,
) -> std::result::Result<(), RunError> {
    let mut rows = Vec::new();
    let mut soft = Vec::new();
    for &a in &s.softplus {
        let (g, predicted) = relu_from_softplus(a, 1)?;
        let measured = softplus_deviation(&g, a)?;
        rows.push(format!("softplus,{a},{measured}"));
        soft.push(json!({ "sharpness": a, "predicted": predicted, "measured": measured }));
    }
    let mut sums = None;
    let mut reached = true;
    if let Some(spec) = &s.sums {
        let mut curve = Vec::new();
        let mut fit = None;
        for k in 1..=spec.budget {
            match relu_from_sums(spec.activation, &spec.domain, k, spec.tol) {
                Ok(f) => {
                    rows.push(format!("sums,{k},{}", f.residual));
                    curve.push(f.residual);
                    fit = Some(f);
                    break;
                }
                Err(Error::BudgetExceeded { best }) => {
                    rows.push(format!("sums,{k},{best}"));
                    curve.push(best);
                }
                Err(e) => return Err(e.into()),
            }
        }
        reached = fit.is_some();
        sums = Some(json!({
            "activation": spec.activation,
            "tol": spec.tol,
            "curve": curve,
            "fit": fit,
        }));
    }
    art.csv("residuals.csv", "method,parameter,residual", rows)?;
    art.json(
        "report.json",
        &with(header(config, art), json!({ "softplus": soft, "sums": sums })),
    )?;
    art.say(format!("{} softplus widths measured", s.softplus.len()));
    if let Some(spec) = &s.sums {
        if !reached {
            return Err(RunError::Tolerance(format!(
                "no sum of at most {} terms reached {}",
                spec.budget, spec.tol
            )));
        }
        art.say("sum fit reached its tolerance");
    }
    Ok(())
}

pub(crate) fn gronwall(
    config: &ExperimentConfig,
    s: &GronwallSpec,
    seed: u64,
    art: &mut Artifacts,
) -> std::result::Result<(), RunError> {
    let relu = VectorField::relu(s.dim)?;
    let [lo, hi] = s.sharpness;
    let mut rows = Vec::with_capacity(s.trials);
    let mut held = 0;
    for k in 0..s.trials {
        let mut r = rng(seed, TRIAL_STREAMS | k as u64);
        let a = r.gen_range(lo.ln()..=hi.ln()).exp();
        let x0 = s
            .domain
            .from_unit(&(0..s.dim).map(|_| r.gen::<f64>()).collect::<Vec<_>>());
        let (g, _) = relu_from_softplus(a, s.dim)?;
        let delta = softplus_deviation(&g, a)?;
        let bound = gronwall_bound(&relu, &s.domain, s.tau, delta)?.bound;
        let exact = flow(&relu, s.tau, &x0, &s.integrator)?;
        let approx = flow_numeric(&g, s.tau, &x0, &s.integrator)?;
        let measured = (exact - approx).norm();
        if measured <= bound {
            held += 1;
        }
        rows.push(format!("{k},{a},{delta},{measured},{bound}"));
    }
    art.csv("bound.csv", "trial,sharpness,delta,measured,bound", rows)?;
    art.json(
        "report.json",
        &with(
            header(config, art),
            json!({ "trials": s.trials, "bound_held": held, "tau": s.tau, "dim": s.dim }),
        ),
    )?;
    art.say(format!("bound held in {held}/{} trials", s.trials));
    if held < s.trials {
        return Err(RunError::Tolerance(format!(
            "measured deviation exceeded the bound in {} trials",
            s.trials - held
        )));
    }
    Ok(())
}
