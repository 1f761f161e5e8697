//! Experiment configuration documents and their validation.
//!
//! A config is one JSON object. Common keys are `name`, `output`, an
//! optional `seed` and `description`, and `kind`; the remaining keys depend
//! on the kind:
//!
//! ```json
//! {
//!   "name": "commutator_linear",
//!   "kind": "convergence",
//!   "output": "out/commutator_linear",
//!   "scheme": {"type": "commutator", "f1": {..}, "f2": {..}},
//!   "tau": 1.0,
//!   "domain": {"lower": [-1, -1], "upper": [1, 1]},
//!   "n_values": [8, 16, 32, 64, 128, 256, 512, 1024]
//! }
//! ```

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::flows::Region;
use crate::universality::{InterpolationFamily, InterpolationProblem, SpanFamily, DEFAULT_RANK_THRESHOLD};
use crate::{Activation, AxisBox, FieldKind, IntegratorConfig, NamedField, VectorField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Required by every experiment that draws random numbers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub output: PathBuf,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Convergence(ConvergenceSpec),
    Interpolate(InterpolateSpec),
    Rank(RankSpec),
    Counterexample(CounterexampleSpec),
    ApproxRelu(ApproxReluSpec),
    Gronwall(GronwallSpec),
}

impl Experiment {
    pub const KINDS: [&'static str; 6] = [
        "convergence",
        "interpolate",
        "rank",
        "counterexample",
        "approx-relu",
        "gronwall",
    ];

    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Convergence(_) => "convergence",
            Experiment::Interpolate(_) => "interpolate",
            Experiment::Rank(_) => "rank",
            Experiment::Counterexample(_) => "counterexample",
            Experiment::ApproxRelu(_) => "approx-relu",
            Experiment::Gronwall(_) => "gronwall",
        }
    }

    /// True when a run draws random numbers and so needs a seed.
    pub fn is_stochastic(&self) -> bool {
        match self {
            Experiment::Convergence(_) | Experiment::ApproxRelu(_) => false,
            Experiment::Interpolate(s) => s.random.is_some(),
            Experiment::Rank(_) | Experiment::Counterexample(_) | Experiment::Gronwall(_) => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedField {
    pub coeff: f64,
    pub field: VectorField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SchemeSpec {
    /// Cyclic composition of `φ_{a_i f_i}^{τ/n}`, `n` times.
    LieTrotter { terms: Vec<WeightedField> },
    /// The four-flow commutator scheme for `[f1, f2]`.
    Commutator { f1: VectorField, f2: VectorField },
}

/// How the target flow is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Closed form when the target has one, otherwise RK4.
    #[default]
    Auto,
    /// Always RK4 at `reference_steps_per_unit`.
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeExpectation {
    pub slope: f64,
    pub tol: f64,
}

fn default_reference_steps() -> u32 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub scheme: SchemeSpec,
    /// Field whose flow is approximated. Defaults to the sum of the terms,
    /// or for affine commutator pairs to their bracket.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<VectorField>,
    pub tau: f64,
    pub domain: AxisBox,
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub reference: ReferenceKind,
    /// RK4 resolution of a numeric reference flow.
    #[serde(default = "default_reference_steps")]
    pub reference_steps_per_unit: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<SlopeExpectation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    AssRelu,
    Aff,
    Diag,
}

fn default_scale() -> f64 {
    2.0
}

fn default_interp_tolerance() -> f64 {
    1e-6
}

/// Points drawn uniformly from `[−scale, scale]^dim`; in one dimension the
/// targets are sorted like the sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomProblem {
    pub n: usize,
    pub dim: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolateSpec {
    pub family: FamilyName,
    /// Base field for `aff` and `diag`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<VectorField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<InterpolationProblem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomProblem>,
    /// Residual tolerance for random problems.
    #[serde(default = "default_interp_tolerance")]
    pub tolerance: f64,
}

impl InterpolateSpec {
    pub fn family(&self) -> Option<InterpolationFamily> {
        match (self.family, &self.field) {
            (FamilyName::AssRelu, _) => Some(InterpolationFamily::AssRelu),
            (FamilyName::Aff, Some(f)) => Some(InterpolationFamily::Aff(f.clone())),
            (FamilyName::Diag, Some(f)) => Some(InterpolationFamily::Diag(f.clone())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictName {
    FullRank,
    Deficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankExpectation {
    pub verdict: VerdictName,
    /// Expected normalized witness, compared in the max norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(default = "default_interp_tolerance")]
    pub tol: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_RANK_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSpec {
    pub field: VectorField,
    pub family: SpanFamily,
    /// Explicit configuration; otherwise `random_points` points are drawn
    /// with every coordinate strictly increasing in the point index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_points: Option<usize>,
    /// Sampled family members; defaults to `4·dN`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<RankExpectation>,
}

fn default_counter_field() -> VectorField {
    VectorField::named(NamedField::PermuteRelu, 2).expect("permute_relu is two dimensional")
}
fn default_programs() -> usize {
    20
}
fn default_legs() -> usize {
    6
}
fn default_base_points() -> usize {
    100
}
fn default_counter_domain() -> AxisBox {
    AxisBox::cube(2, -4.0, 4.0).expect("valid box")
}
fn default_disks() -> [Region; 2] {
    [
        Region::disk(&[-2.0, 0.0], 1.0).expect("valid disk"),
        Region::disk(&[2.0, 0.0], 1.0).expect("valid disk"),
    ]
}
fn default_samples() -> usize {
    100_000
}
fn default_sigmas() -> f64 {
    3.0
}
fn default_spread() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleExpectation {
    /// Largest allowed `(max − min)/|mean|` of `det DP` over the base points.
    #[serde(default = "default_spread")]
    pub det_spread: f64,
    /// Agreement radius, in standard errors, for volume comparisons.
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

/// Random programs from `F_ass(f)`: even legs flow `±f`, odd legs a random
/// affine field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    #[serde(default = "default_counter_field")]
    pub field: VectorField,
    #[serde(default = "default_programs")]
    pub programs: usize,
    #[serde(default = "default_legs")]
    pub legs: usize,
    #[serde(default = "default_base_points")]
    pub base_points: usize,
    /// Box the base points are drawn from.
    #[serde(default = "default_counter_domain")]
    pub domain: AxisBox,
    #[serde(default = "default_disks")]
    pub regions: [Region; 2],
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<CounterexampleExpectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumsSpec {
    pub activation: Activation,
    /// One-dimensional interval.
    pub domain: AxisBox,
    pub budget: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReluSpec {
    /// Softplus sharpness values `a`.
    #[serde(default)]
    pub softplus: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sums: Option<SumsSpec>,
}

fn default_gronwall_dim() -> usize {
    2
}
fn default_trials() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallSpec {
    #[serde(default = "default_gronwall_dim")]
    pub dim: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub tau: f64,
    /// Initial points are drawn from this box.
    pub domain: AxisBox,
    /// Softplus sharpness is drawn log-uniformly from this range.
    pub sharpness: [f64; 2],
    #[serde(default)]
    pub integrator: IntegratorConfig,
}

/// A problem with one config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ExperimentConfig {
    /// Parses a JSON document. Schema errors come back as one diagnostic.
    pub fn from_json(text: &str) -> std::result::Result<Self, Diagnostic> {
        serde_json::from_str(text).map_err(|e| Diagnostic::new("<document>", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    /// SHA-256 of the compact canonical serialization, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configs serialize");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Invariant checks beyond the schema. Empty means runnable.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.name.trim().is_empty() {
            out.push(Diagnostic::new("name", "must not be empty"));
        }
        if self.output.as_os_str().is_empty() {
            out.push(Diagnostic::new("output", "must not be empty"));
        } else if self.output.exists() && !self.output.is_dir() {
            out.push(Diagnostic::new("output", "exists and is not a directory"));
        }
        if self.experiment.is_stochastic() && self.seed.is_none() {
            out.push(Diagnostic::new(
                "seed",
                format!("required for {} experiments", self.experiment.kind()),
            ));
        }
        match &self.experiment {
            Experiment::Convergence(s) => check_convergence(s, &mut out),
            Experiment::Interpolate(s) => check_interpolate(s, &mut out),
            Experiment::Rank(s) => check_rank(s, &mut out),
            Experiment::Counterexample(s) => check_counterexample(s, &mut out),
            Experiment::ApproxRelu(s) => check_approx(s, &mut out),
            Experiment::Gronwall(s) => check_gronwall(s, &mut out),
        }
        out
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn check_integrator(cfg: &IntegratorConfig, out: &mut Vec<Diagnostic>) {
    if cfg.steps_per_unit == 0 {
        out.push(Diagnostic::new("integrator.steps_per_unit", "must be >= 1"));
    }
    if !positive(cfg.guard_radius) {
        out.push(Diagnostic::new("integrator.guard_radius", "must be positive"));
    }
}

/// Bracket of two affine fields, `[f, g](x) = Dg f − Df g`.
pub(crate) fn affine_bracket(f: &VectorField, g: &VectorField) -> Option<VectorField> {
    match (f.kind(), g.kind()) {
        (FieldKind::Affine { a, b: p }, FieldKind::Affine { a: c, b: q }) => {
            VectorField::affine(c * a - a * c, c * p - a * q).ok()
        }
        _ => None,
    }
}

fn check_convergence(s: &ConvergenceSpec, out: &mut Vec<Diagnostic>) {
    let dims: Vec<usize> = match &s.scheme {
        SchemeSpec::LieTrotter { terms } => {
            if terms.len() < 2 {
                out.push(Diagnostic::new("scheme.terms", "at least two terms required"));
            }
            terms.iter().map(|t| t.field.dim()).collect()
        }
        SchemeSpec::Commutator { f1, f2 } => {
            if s.target.is_none() && affine_bracket(f1, f2).is_none() {
                out.push(Diagnostic::new(
                    "target",
                    "required unless both commutator fields are affine",
                ));
            }
            vec![f1.dim(), f2.dim()]
        }
    };
    let d = s.domain.dim();
    if dims
        .iter()
        .chain(s.target.as_ref().map(|t| t.dim()).iter())
        .any(|&k| k != d)
    {
        out.push(Diagnostic::new("domain", "dimension differs from the fields"));
    }
    let mut ns = s.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 4 {
        out.push(Diagnostic::new("n_values", "≥4 n-values required"));
    }
    if ns.first() == Some(&0) {
        out.push(Diagnostic::new("n_values", "step counts must be positive"));
    }
    if !positive(s.tau) {
        out.push(Diagnostic::new("tau", "must be positive"));
    }
    if s.reference_steps_per_unit == 0 {
        out.push(Diagnostic::new("reference_steps_per_unit", "must be >= 1"));
    }
    check_integrator(&s.integrator, out);
    if let Some(e) = &s.expect {
        if !(e.slope.is_finite() && positive(e.tol)) {
            out.push(Diagnostic::new("expect", "slope must be finite and tol positive"));
        }
    }
}

fn check_interpolate(s: &InterpolateSpec, out: &mut Vec<Diagnostic>) {
    match (s.family, &s.field) {
        (FamilyName::AssRelu, Some(_)) => out.push(Diagnostic::new("field", "ass_relu takes no base field")),
        (FamilyName::Aff | FamilyName::Diag, None) => {
            out.push(Diagnostic::new("field", "required for aff and diag families"))
        }
        _ => {}
    }
    match (&s.problem, &s.random) {
        (Some(_), Some(_)) | (None, None) => out.push(Diagnostic::new(
            "problem",
            "give exactly one of problem and random",
        )),
        (Some(p), None) => {
            if let Some(f) = &s.field {
                if f.dim() != p.dim() {
                    out.push(Diagnostic::new("field", "dimension differs from the problem"));
                }
            }
        }
        (None, Some(r)) => {
            if r.n == 0 || r.dim == 0 {
                out.push(Diagnostic::new("random", "n and dim must be >= 1"));
            }
            if !positive(r.scale) {
                out.push(Diagnostic::new("random.scale", "must be positive"));
            }
            if let Some(f) = &s.field {
                if f.dim() != r.dim {
                    out.push(Diagnostic::new("field", "dimension differs from random.dim"));
                }
            }
        }
    }
    if !positive(s.tolerance) {
        out.push(Diagnostic::new("tolerance", "must be positive"));
    }
}

fn check_rank(s: &RankSpec, out: &mut Vec<Diagnostic>) {
    let d = s.field.dim();
    let n = match (&s.points, s.random_points) {
        (Some(_), Some(_)) | (None, None) => {
            out.push(Diagnostic::new(
                "points",
                "give exactly one of points and random_points",
            ));
            return;
        }
        (Some(pts), None) => {
            if pts.iter().any(|p| p.len() != d) {
                out.push(Diagnostic::new(
                    "points",
                    format!("every point needs {d} coordinates"),
                ));
            }
            pts.len()
        }
        (None, Some(n)) => n,
    };
    if n == 0 {
        out.push(Diagnostic::new("points", "at least one point required"));
    }
    if let Some(m) = s.samples {
        if m < d * n {
            out.push(Diagnostic::new(
                "samples",
                format!("need at least dN = {}", d * n),
            ));
        }
    }
    if !(s.threshold > 0.0 && s.threshold < 1.0) {
        out.push(Diagnostic::new("threshold", "must lie in (0, 1)"));
    }
    if let Some(e) = &s.expect {
        if let Some(w) = &e.witness {
            if w.len() != d * n {
                out.push(Diagnostic::new(
                    "expect.witness",
                    format!("needs {} entries", d * n),
                ));
            }
        }
    }
}

fn check_counterexample(s: &CounterexampleSpec, out: &mut Vec<Diagnostic>) {
    let d = s.field.dim();
    if s.domain.dim() != d {
        out.push(Diagnostic::new("domain", "dimension differs from the field"));
    }
    for (i, r) in s.regions.iter().enumerate() {
        if r.dim() != d {
            out.push(Diagnostic::new(
                format!("regions[{i}]"),
                "dimension differs from the field",
            ));
        } else if let Err(e) = r.validate() {
            out.push(Diagnostic::new(format!("regions[{i}]"), e.to_string()));
        }
    }
    if s.programs == 0 || s.legs == 0 || s.base_points < 2 || s.samples < 2 {
        out.push(Diagnostic::new(
            "programs",
            "programs and legs must be >= 1, base_points and samples >= 2",
        ));
    }
    check_integrator(&s.integrator, out);
}

fn check_approx(s: &ApproxReluSpec, out: &mut Vec<Diagnostic>) {
    if s.softplus.is_empty() && s.sums.is_none() {
        out.push(Diagnostic::new(
            "softplus",
            "nothing to do: give softplus or sums",
        ));
    }
    if s.softplus.iter().any(|&a| !positive(a)) {
        out.push(Diagnostic::new("softplus", "sharpness values must be positive"));
    }
    if let Some(sums) = &s.sums {
        if let Err(e) = sums.activation.validate() {
            out.push(Diagnostic::new("sums.activation", e.to_string()));
        }
        if sums.domain.dim() != 1 {
            out.push(Diagnostic::new("sums.domain", "must be one dimensional"));
        }
        if sums.budget == 0 {
            out.push(Diagnostic::new("sums.budget", "must be >= 1"));
        }
        if !positive(sums.tol) {
            out.push(Diagnostic::new("sums.tol", "must be positive"));
        }
    }
}

fn check_gronwall(s: &GronwallSpec, out: &mut Vec<Diagnostic>) {
    if s.dim == 0 || s.domain.dim() != s.dim {
        out.push(Diagnostic::new("domain", "dimension must equal dim >= 1"));
    }
    if s.trials == 0 {
        out.push(Diagnostic::new("trials", "must be >= 1"));
    }
    if !positive(s.tau) {
        out.push(Diagnostic::new("tau", "must be positive"));
    }
    let [lo, hi] = s.sharpness;
    if !(positive(lo) && positive(hi) && lo <= hi) {
        out.push(Diagnostic::new("sharpness", "need 0 < lo <= hi"));
    }
    check_integrator(&s.integrator, out);
}
