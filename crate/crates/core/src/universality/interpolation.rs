//! Exact interpolation `Φ(x_i) = y_i` by flow programs.
//!
//! Every construction here is a sequence of *tail moves*. For a unit
//! direction `n`, a kink `h` and a direction `w` with `n·w = 1`,
//!
//! ```text
//! T(x) = x + (ρ − 1) · max(n·x − h, 0) · w
//! ```
//!
//! fixes the half-space `n·x ≤ h` and scales `n·x − h` by `ρ > 0` beyond it.
//! Choosing `w ∥ q − p` and `ρ = (n·q − h)/(n·p − h)` sends `p` to `q`
//! exactly. With an affine map `y = Bx + t` whose first row is `(n, −h)` and
//! whose remaining rows annihilate `w` and are negative on every tracked
//! point, `T = (B·+t)⁻¹ ∘ φ_{±ReLU}^{|ln ρ|} ∘ (B·+t)`, so `T` lies in the
//! hypothesis space of the ReLU families.

use serde::{Deserialize, Serialize};

use crate::fields::Activation;
use crate::flows::{FlowProgram, Leg};
use crate::linalg::{oriented_frame, rotation_factors};
use crate::{Error, FieldKind, Matrix, Result, Vector, VectorField};

/// The points `z_i = i e₁`, `i = 1..N`, with interpolation radius
/// `δ = 1/(2N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalConfig {
    pub n: usize,
    pub dim: usize,
}

impl CanonicalConfig {
    pub fn new(n: usize, dim: usize) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "canonical configuration needs N, d >= 1".into(),
            ));
        }
        Ok(Self { n, dim })
    }

    pub fn radius(&self) -> f64 {
        1.0 / (2.0 * self.n as f64)
    }

    /// `z_i` for 0-based `i`, i.e. `(i + 1) e₁`.
    pub fn point(&self, i: usize) -> Vector {
        let mut z = Vector::zeros(self.dim);
        z[0] = (i + 1) as f64;
        z
    }

    pub fn points(&self) -> Vec<Vector> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

/// Data pairs to interpolate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemDoc", into = "ProblemDoc")]
pub struct InterpolationProblem {
    dim: usize,
    sources: Vec<Vector>,
    targets: Vec<Vector>,
    tolerance: f64,
}

#[derive(Serialize, Deserialize)]
struct ProblemDoc {
    sources: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    tolerance: f64,
}

impl TryFrom<ProblemDoc> for InterpolationProblem {
    type Error = Error;
    fn try_from(doc: ProblemDoc) -> Result<Self> {
        let to_vecs = |xs: Vec<Vec<f64>>| xs.into_iter().map(Vector::from_vec).collect::<Vec<_>>();
        InterpolationProblem::new(to_vecs(doc.sources), to_vecs(doc.targets), doc.tolerance)
    }
}

impl From<InterpolationProblem> for ProblemDoc {
    fn from(p: InterpolationProblem) -> Self {
        let to_rows = |xs: Vec<Vector>| xs.into_iter().map(|v| v.iter().cloned().collect()).collect();
        ProblemDoc {
            sources: to_rows(p.sources),
            targets: to_rows(p.targets),
            tolerance: p.tolerance,
        }
    }
}

fn all_distinct(points: &[Vector]) -> Option<(usize, usize)> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                return Some((i, j));
            }
        }
    }
    None
}

impl InterpolationProblem {
    /// Validates distinctness and, in one dimension, that the data are
    /// increasing in the same order: flows on the line are increasing maps.
    pub fn new(sources: Vec<Vector>, targets: Vec<Vector>, tolerance: f64) -> Result<Self> {
        if sources.is_empty() || sources.len() != targets.len() {
            return Err(Error::InvalidProblem(
                "need the same positive number of sources and targets".into(),
            ));
        }
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidProblem("tolerance must be positive".into()));
        }
        let dim = sources[0].len();
        if dim == 0 {
            return Err(Error::InvalidProblem(
                "points must have positive dimension".into(),
            ));
        }
        for p in sources.iter().chain(&targets) {
            if p.len() != dim {
                return Err(Error::InvalidProblem("points must share a dimension".into()));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidProblem("points must be finite".into()));
            }
        }
        if let Some((i, j)) = all_distinct(&sources) {
            return Err(Error::InvalidProblem(format!("sources {i} and {j} coincide")));
        }
        if let Some((i, j)) = all_distinct(&targets) {
            return Err(Error::InvalidProblem(format!("targets {i} and {j} coincide")));
        }
        if dim == 1 {
            let mut order: Vec<usize> = (0..sources.len()).collect();
            order.sort_by(|&a, &b| sources[a][0].total_cmp(&sources[b][0]));
            if order.windows(2).any(|w| targets[w[1]][0] <= targets[w[0]][0]) {
                return Err(Error::InvalidProblem(
                    "in one dimension targets must be ordered like the sources".into(),
                ));
            }
        }
        Ok(Self {
            dim,
            sources,
            targets,
            tolerance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn sources(&self) -> &[Vector] {
        &self.sources
    }

    pub fn targets(&self) -> &[Vector] {
        &self.targets
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// `max_i ‖P(x_i) − y_i‖`.
    pub fn residual(&self, program: &FlowProgram) -> Result<f64> {
        max_residual(program, &self.sources, &self.targets)
    }
}

pub fn max_residual(program: &FlowProgram, from: &[Vector], to: &[Vector]) -> Result<f64> {
    let compiled = program.compile(&Default::default())?;
    let mut worst = 0.0f64;
    for (x, y) in from.iter().zip(to) {
        worst = worst.max((compiled.apply(x)? - y).norm());
    }
    Ok(worst)
}

/// Control family the interpolating program is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "field", rename_all = "snake_case")]
pub enum InterpolationFamily {
    /// Affine fields and `±ReLU`.
    AssRelu,
    /// `x ↦ S f(Wx + b)`.
    Aff(VectorField),
    /// `x ↦ D f(Λx + b)` with diagonal `D`, `Λ`.
    Diag(VectorField),
}

impl InterpolationFamily {
    pub fn name(&self) -> &'static str {
        match self {
            InterpolationFamily::AssRelu => "ass_relu",
            InterpolationFamily::Aff(_) => "aff",
            InterpolationFamily::Diag(_) => "diag",
        }
    }

    /// Which leg shape the constructions emit for this family.
    fn emitter(&self, dim: usize) -> Result<Emitter> {
        match self {
            InterpolationFamily::AssRelu => Ok(Emitter::Affine),
            InterpolationFamily::Aff(f) if f.dim() == dim && is_relu(f) => Ok(Emitter::Conjugated),
            other => Err(Error::UnsupportedFamily(format!(
                "exact interpolation is implemented for ass_relu and aff(relu); got {}",
                other.name()
            ))),
        }
    }

    /// True when `leg` is an admissible member of the family, the
    /// direction flag accounting for the family's symmetry.
    pub fn contains_leg(&self, leg: &Leg) -> bool {
        let f = &leg.field;
        match self {
            InterpolationFamily::AssRelu => match f.kind() {
                FieldKind::Affine { .. } => true,
                _ => is_relu(f) || is_relu(&f.negated()),
            },
            InterpolationFamily::Aff(base) => match f.kind() {
                FieldKind::Conjugated { base: b, .. } => b.as_ref() == base,
                _ => false,
            },
            InterpolationFamily::Diag(base) => match f.kind() {
                FieldKind::Conjugated {
                    outer,
                    inner,
                    base: b,
                    ..
                } => b.as_ref() == base && is_diagonal(outer) && is_diagonal(inner),
                _ => false,
            },
        }
    }
}

fn is_diagonal(m: &Matrix) -> bool {
    m.iter()
        .enumerate()
        .all(|(k, v)| *v == 0.0 || k / m.nrows() == k % m.nrows())
}

fn is_relu(f: &VectorField) -> bool {
    matches!(f.kind(), FieldKind::Separable { act: Activation::Relu, active } if active.iter().all(|a| *a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Emitter {
    /// Affine legs around a `±ReLU` leg.
    Affine,
    /// One `B⁻¹ ReLU(Bx + t)` leg per move.
    Conjugated,
}

/// A planned tail move with its affine frame.
struct TailMove {
    frame: Matrix,
    shift: Vector,
    log_ratio: f64,
}

/// Margin by which untouched frame coordinates stay negative.
const FRAME_MARGIN: f64 = 1.0;
/// Minimum `|n·(q − p)| / ‖q − p‖` before a move is routed through a
/// midpoint.
const ROUTE_COSINE: f64 = 0.25;

impl TailMove {
    fn plan(n: &Vector, h: f64, p: &Vector, q: &Vector, tracked: &[Vector]) -> Result<Self> {
        let d = n.len();
        let dq = q - p;
        let along = n.dot(&dq);
        let (num, den) = (n.dot(q) - h, n.dot(p) - h);
        if !(num > 0.0 && den > 0.0) || along == 0.0 {
            return Err(Error::SteeringFailed(format!(
                "kink {h} does not separate the moving point (n·p − h = {den}, n·q − h = {num})"
            )));
        }
        let w = dq / along;
        let mut frame = Matrix::zeros(d, d);
        frame.set_row(0, &n.transpose());
        if d > 1 {
            let basis = oriented_frame(std::slice::from_ref(n), d)?;
            for j in 1..d {
                let m = basis.row(j).transpose();
                let r = &m - n * m.dot(&w);
                frame.set_row(j, &r.transpose());
            }
            if frame.determinant() < 0.0 {
                let mut last = frame.row_mut(d - 1);
                last *= -1.0;
            }
        }
        let mut shift = Vector::zeros(d);
        shift[0] = -h;
        for j in 1..d {
            let row = frame.row(j);
            let top = tracked
                .iter()
                .map(|x| (row * x)[0])
                .fold(f64::NEG_INFINITY, f64::max);
            shift[j] = -top - FRAME_MARGIN;
        }
        Ok(Self {
            frame,
            shift,
            log_ratio: (num / den).ln(),
        })
    }

    fn legs(&self, emitter: Emitter) -> Result<Vec<Leg>> {
        let d = self.shift.len();
        let relu = VectorField::relu(d)?;
        let scale = if self.log_ratio >= 0.0 {
            Leg::forward
        } else {
            Leg::backward
        };
        match emitter {
            Emitter::Conjugated => {
                let inv = self.frame.clone().try_inverse().ok_or(Error::SingularMatrix)?;
                let g = VectorField::conjugated(inv, self.frame.clone(), self.shift.clone(), relu)?;
                Ok(vec![scale(g, self.log_ratio.abs())?])
            }
            Emitter::Affine => {
                let into = affine_legs(&self.frame, &self.shift)?;
                let mut legs = into.clone();
                legs.push(scale(relu, self.log_ratio.abs())?);
                legs.extend(into.iter().rev().map(Leg::inverse));
                Ok(legs)
            }
        }
    }
}

/// Legs realizing `x ↦ Bx + t` for `det B > 0`: `B = Q D U` with `U` unit
/// upper triangular, `D` positive diagonal and `Q` a rotation split into
/// plane rotations.
fn affine_legs(b: &Matrix, t: &Vector) -> Result<Vec<Leg>> {
    let d = t.len();
    let qr = b.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..d {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
            r.row_mut(i).neg_mut();
        }
        if r[(i, i)] <= 0.0 {
            return Err(Error::SingularMatrix);
        }
    }
    let diag = r.diagonal();
    let u = Matrix::from_fn(d, d, |i, j| r[(i, j)] / diag[i]);
    let nil = &u - Matrix::identity(d, d);
    // log(I + N) = N − N²/2 + N³/3 − ⋯, finite since N is nilpotent
    let mut log_u = Matrix::zeros(d, d);
    let mut power = nil.clone();
    for k in 1..d {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        log_u += &power * (sign / k as f64);
        power = &power * &nil;
    }
    let mut legs = Vec::new();
    if log_u.amax() > 0.0 {
        legs.push(Leg::forward(VectorField::linear(log_u)?, 1.0)?);
    }
    let log_d = diag.map(f64::ln);
    if log_d.amax() > 0.0 {
        legs.push(Leg::forward(
            VectorField::linear(Matrix::from_diagonal(&log_d))?,
            1.0,
        )?);
    }
    for rot in rotation_factors(&q)? {
        if rot.angle != 0.0 {
            legs.push(Leg::forward(VectorField::linear(rot.generator(d))?, 1.0)?);
        }
    }
    if t.amax() > 0.0 {
        legs.push(Leg::forward(VectorField::constant(t.clone())?, 1.0)?);
    }
    Ok(legs)
}

/// Accumulates tail moves while tracking the points they act on.
struct Builder {
    emitter: Emitter,
    program: FlowProgram,
    points: Vec<Vector>,
}

impl Builder {
    fn new(emitter: Emitter, points: &[Vector]) -> Result<Self> {
        Ok(Self {
            emitter,
            program: FlowProgram::identity(points[0].len())?,
            points: points.to_vec(),
        })
    }

    fn push_legs(&mut self, legs: Vec<Leg>) -> Result<()> {
        let step = FlowProgram::from_legs(self.program.dim(), legs)?;
        let compiled = step.compile(&Default::default())?;
        for p in self.points.iter_mut() {
            *p = compiled.apply(p)?;
        }
        self.program = std::mem::replace(&mut self.program, FlowProgram::identity(1)?).then(&step)?;
        Ok(())
    }

    /// Moves tracked point `idx` to `q` with kink `h` along `n`; points with
    /// `n·x ≤ h` are untouched.
    fn tail_move(&mut self, n: &Vector, h: f64, idx: usize, q: &Vector) -> Result<()> {
        let p = self.points[idx].clone();
        let gap = (q - &p).norm();
        if gap <= 1e-14 * (1.0 + p.amax()) {
            return Ok(());
        }
        let stops = if n.dot(&(q - &p)).abs() < ROUTE_COSINE * gap {
            let mid = (&p + q) / 2.0 + n * gap;
            vec![mid, q.clone()]
        } else {
            vec![q.clone()]
        };
        for stop in stops {
            let from = self.points[idx].clone();
            let mv = TailMove::plan(n, h, &from, &stop, &self.points)?;
            self.push_legs(mv.legs(self.emitter)?)?;
        }
        Ok(())
    }

    /// Translation of every point by `v`.
    fn translate(&mut self, v: &Vector) -> Result<()> {
        let d = v.len();
        let field = match self.emitter {
            Emitter::Affine => VectorField::constant(v.clone())?,
            Emitter::Conjugated => {
                // S ReLU(0·x + 1) = S 1 = v
                let mut s = Matrix::zeros(d, d);
                s.set_column(0, v);
                VectorField::conjugated(
                    s,
                    Matrix::zeros(d, d),
                    Vector::from_element(d, 1.0),
                    VectorField::relu(d)?,
                )?
            }
        };
        self.push_legs(vec![Leg::forward(field, 1.0)?])
    }

    /// Stage `lo < h < min(n·p, n·q, n·mid)`: moves point `idx` to `q`.
    fn move_past(&mut self, n: &Vector, lo: Option<f64>, idx: usize, q: &Vector) -> Result<()> {
        let p = &self.points[idx];
        let gap = (q - p).norm();
        let mut hi = n.dot(p).min(n.dot(q));
        if n.dot(&(q - p)).abs() < ROUTE_COSINE * gap {
            hi = hi.min(n.dot(&((p + q) / 2.0)) + gap);
        }
        let lo = lo.unwrap_or(hi - 1.0);
        if !(hi > lo) {
            return Err(Error::SteeringFailed(format!(
                "point {idx} cannot be separated from the points already placed"
            )));
        }
        self.tail_move(n, 0.5 * (lo + hi), idx, q)
    }
}

/// Moves `z_i = i e₁` to `y_i` for `‖y_i − z_i‖ < δ`, one point per stage.
///
/// Stage `i` fixes the half-space `x₁ ≤ h` holding the points already placed
/// and moves point `i` exactly onto `y_i`; points further along `e₁` ride
/// along and are placed by later stages.
pub fn local_uip_relu(cfg: &CanonicalConfig, targets: &[Vector]) -> Result<FlowProgram> {
    local_uip(cfg, targets, &InterpolationFamily::AssRelu)
}

pub fn local_uip(
    cfg: &CanonicalConfig,
    targets: &[Vector],
    family: &InterpolationFamily,
) -> Result<FlowProgram> {
    let emitter = family.emitter(cfg.dim)?;
    if targets.len() != cfg.n {
        return Err(Error::InvalidArgument(format!(
            "expected {} targets, got {}",
            cfg.n,
            targets.len()
        )));
    }
    let z = cfg.points();
    let delta = cfg.radius();
    for (i, (y, zi)) in targets.iter().zip(&z).enumerate() {
        crate::error::check_dim(cfg.dim, y.len())?;
        let distance = (y - zi).norm();
        if !(distance < delta) {
            return Err(Error::TargetOutsideRadius {
                index: i,
                distance,
                radius: delta,
            });
        }
    }
    let mut b = Builder::new(emitter, &z)?;
    if targets.iter().zip(&z).all(|(y, zi)| y == zi) {
        return Ok(b.program);
    }
    if cfg.n == 1 {
        b.translate(&(&targets[0] - &z[0]))?;
        return Ok(b.program);
    }
    let e1 = cfg.point(0);
    for i in 0..cfg.n {
        let lo = targets[..i].iter().map(|y| y[0]).reduce(f64::max);
        b.move_past(&e1, lo, i, &targets[i])?;
    }
    verify(&b.program, &z, targets, LOCAL_TOLERANCE)?;
    Ok(b.program)
}

/// Residual allowed for the local and steering constructions.
pub const LOCAL_TOLERANCE: f64 = 1e-9;

fn verify(program: &FlowProgram, from: &[Vector], to: &[Vector], tol: f64) -> Result<f64> {
    let r = max_residual(program, from, to)?;
    if !(r <= tol) {
        return Err(Error::ToleranceNotMet {
            achieved: r,
            tolerance: tol,
        });
    }
    Ok(r)
}

const DIRECTION_CANDIDATES: u64 = 256;

/// Unit direction with `n·e₁ ≥ 0` maximizing the smallest gap between the
/// sorted projections of `points`.
fn separating_direction(points: &[Vector]) -> Result<Vector> {
    let d = points[0].len();
    let mut candidates = vec![Vector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 })];
    candidates.push(Vector::from_element(d, 1.0 / (d as f64).sqrt()));
    for k in 1..=DIRECTION_CANDIDATES {
        let u = Vector::from_iterator(d, crate::linalg::halton(k, d).into_iter().map(|v| 2.0 * v - 1.0));
        let norm = u.norm();
        if norm > 1e-3 {
            candidates.push(u / norm);
        }
    }
    let mut best: Option<(f64, Vector)> = None;
    for mut n in candidates {
        if n[0] < 0.0 {
            n = -n;
        }
        let mut proj: Vec<f64> = points.iter().map(|p| n.dot(p)).collect();
        proj.sort_by(f64::total_cmp);
        let gap = proj.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(g, _)| gap > *g) {
            best = Some((gap, n));
        }
    }
    match best {
        Some((gap, n)) if gap > 1e-9 => Ok(n),
        _ => Err(Error::SteeringFailed("no direction separates the points".into())),
    }
}

/// A program sending each `x_i` to within `δ/2` of `z_i` (exactly onto it
/// unless already that close), built from affine and `±ReLU` legs.
///
/// In `d ≥ 2` two sweeps of tail moves are used. The first, along a
/// direction `n` with distinct projections, parks the points at
/// `rank·n + 2N·i·m` where `m ⊥ n`. The second, along `(n + m)/√2`, along
/// which the parked points are sorted by index, places them at `z_i`.
/// In `d = 1` a single sweep works and the inputs must be increasing.
pub fn steer_to_canonical(points: &[Vector], cfg: &CanonicalConfig) -> Result<FlowProgram> {
    steer_to_canonical_in(points, cfg, &InterpolationFamily::AssRelu)
}

pub fn steer_to_canonical_in(
    points: &[Vector],
    cfg: &CanonicalConfig,
    family: &InterpolationFamily,
) -> Result<FlowProgram> {
    let emitter = family.emitter(cfg.dim)?;
    if points.len() != cfg.n {
        return Err(Error::InvalidArgument(format!(
            "expected {} points, got {}",
            cfg.n,
            points.len()
        )));
    }
    for p in points {
        crate::error::check_dim(cfg.dim, p.len())?;
    }
    if let Some((i, j)) = all_distinct(points) {
        return Err(Error::SteeringFailed(format!("points {i} and {j} coincide")));
    }
    let z = cfg.points();
    let mut b = Builder::new(emitter, points)?;
    let close = points
        .iter()
        .zip(&z)
        .all(|(x, zi)| (x - zi).norm() <= 0.5 * cfg.radius());
    if close {
        return Ok(b.program);
    }
    if cfg.n == 1 {
        b.translate(&(&z[0] - &points[0]))?;
        return Ok(b.program);
    }
    let d = cfg.dim;
    let big_n = cfg.n as f64;
    if d == 1 {
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::SteeringFailed(
                "in one dimension the points must be increasing".into(),
            ));
        }
        let e1 = cfg.point(0);
        for i in 0..cfg.n {
            let lo = if i == 0 { None } else { Some(z[i - 1][0]) };
            b.move_past(&e1, lo, i, &z[i])?;
        }
    } else {
        let n = separating_direction(points)?;
        let mut e1 = Vector::zeros(d);
        e1[0] = 1.0;
        let perp = &e1 - &n * n.dot(&e1);
        let m = if perp.norm() > 1e-8 {
            perp.normalize()
        } else {
            oriented_frame(std::slice::from_ref(&n), d)?.row(1).transpose()
        };
        let mut order: Vec<usize> = (0..cfg.n).collect();
        order.sort_by(|&a, &c| n.dot(&points[a]).total_cmp(&n.dot(&points[c])));
        let mut rank = vec![0usize; cfg.n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r + 1;
        }
        let parked: Vec<Vector> = (0..cfg.n)
            .map(|i| &n * rank[i] as f64 + &m * (2.0 * big_n * (i + 1) as f64))
            .collect();
        for (r, &i) in order.iter().enumerate() {
            let lo = if r == 0 { None } else { Some(r as f64) };
            b.move_past(&n, lo, i, &parked[i])?;
        }
        let n2 = (&n + &m) / 2f64.sqrt();
        for i in 0..cfg.n {
            let lo = if i == 0 { None } else { Some(n2.dot(&z[i - 1])) };
            b.move_past(&n2, lo, i, &z[i])?;
        }
    }
    verify(&b.program, points, &z, LOCAL_TOLERANCE * (1.0 + max_norm(points)))?;
    Ok(b.program)
}

fn max_norm(points: &[Vector]) -> f64 {
    points.iter().map(|p| p.norm()).fold(0.0, f64::max)
}

/// Upper bound on the legs [`steer_to_canonical`] emits: two sweeps of at
/// most two moves per point.
pub fn steer_leg_budget(n: usize, dim: usize, family: &InterpolationFamily) -> usize {
    let moves = if n <= 1 {
        return 1;
    } else if dim == 1 {
        n
    } else {
        4 * n
    };
    moves * legs_per_move(dim, family)
}

/// Legs of one tail move: a single conjugated leg, or the frame legs
/// (shear, scaling, plane rotations, translation), the `±ReLU` leg and the
/// frame legs inverted.
pub fn legs_per_move(dim: usize, family: &InterpolationFamily) -> usize {
    match family {
        InterpolationFamily::AssRelu => {
            let frame = 3 + dim * (dim - 1) / 2 + dim / 2;
            2 * frame + 1
        }
        _ => 1,
    }
}

/// A program interpolating a problem, with its measured residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolant {
    pub program: FlowProgram,
    pub residual: f64,
    /// Legs of `φ₁`, `φ₃⁻¹`, `φ₄`, `φ₂⁻¹` in order.
    pub stage_legs: [usize; 4],
}

/// `Φ = φ₂⁻¹ ∘ φ₄ ∘ φ₃⁻¹ ∘ φ₁` where `φ₁`, `φ₂` steer sources and targets
/// next to the canonical points and `φ₃`, `φ₄` are local interpolants from
/// the canonical points onto those images.
pub fn interpolate(problem: &InterpolationProblem, family: &InterpolationFamily) -> Result<Interpolant> {
    let d = problem.dim();
    let emitter = family.emitter(d)?;
    let mut xs = problem.sources().to_vec();
    let mut ys = problem.targets().to_vec();
    if d == 1 {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a][0].total_cmp(&xs[b][0]));
        xs = order.iter().map(|&i| xs[i].clone()).collect();
        ys = order.iter().map(|&i| ys[i].clone()).collect();
    }
    let (program, stage_legs) = if problem.len() == 1 {
        let mut b = Builder::new(emitter, &xs)?;
        b.translate(&(&ys[0] - &xs[0]))?;
        let legs = b.program.len();
        (b.program, [legs, 0, 0, 0])
    } else {
        let cfg = CanonicalConfig::new(problem.len(), d)?;
        let phi1 = steer_to_canonical_in(&xs, &cfg, family)?;
        let phi2 = steer_to_canonical_in(&ys, &cfg, family)?;
        let c1 = phi1.compile(&Default::default())?;
        let c2 = phi2.compile(&Default::default())?;
        let near_x = xs.iter().map(|x| c1.apply(x)).collect::<Result<Vec<_>>>()?;
        let near_y = ys.iter().map(|y| c2.apply(y)).collect::<Result<Vec<_>>>()?;
        let phi3 = local_uip(&cfg, &near_x, family)?;
        let phi4 = local_uip(&cfg, &near_y, family)?;
        let legs = [phi1.len(), phi3.len(), phi4.len(), phi2.len()];
        let program = phi1.then(&phi3.invert())?.then(&phi4)?.then(&phi2.invert())?;
        (program, legs)
    };
    let residual = problem.residual(&program)?;
    if !(residual <= problem.tolerance()) {
        return Err(Error::ToleranceNotMet {
            achieved: residual,
            tolerance: problem.tolerance(),
        });
    }
    Ok(Interpolant {
        program,
        residual,
        stage_legs,
    })
}
