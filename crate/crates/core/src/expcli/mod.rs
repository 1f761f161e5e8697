//! Batch experiment runner behind the `flowcap` binary.
//!
//! Artifacts per kind:
//!
//! | kind           | files                                                     |
//! |----------------|-----------------------------------------------------------|
//! | convergence    | `convergence.csv` (`n,dt,error`), `report.json`           |
//! | interpolate    | `program.json`, `residuals.csv` (`point,residual`), `report.json` |
//! | rank           | `singular_values.csv` (`index,sigma`), `certificate.json` |
//! | counterexample | `det_j.csv` (`program,point,detJ,detJ_fd`), `volumes.csv` (`program,region,volume,std_error`), `report.json` |
//! | approx-relu    | `residuals.csv` (`method,parameter,residual`), `report.json` |
//! | gronwall       | `bound.csv` (`trial,sharpness,delta,measured,bound`), `report.json` |
//!
//! Every JSON report carries `config_digest`, the SHA-256 of the config's
//! canonical serialization.

mod config;
mod examples;
mod experiments;
mod runner;

pub use config::{
    ApproxReluSpec, ConvergenceSpec, CounterexampleExpectation, CounterexampleSpec, Diagnostic, Experiment,
    ExperimentConfig, FamilyName, GronwallSpec, InterpolateSpec, RandomProblem, RankExpectation, RankSpec,
    ReferenceKind, SchemeSpec, SlopeExpectation, SumsSpec, VerdictName, WeightedField,
};
pub use examples::{example, EXAMPLES};
pub use experiments::{increasing_configuration, random_ass_program, random_problem};
pub use runner::{load_config, output_dir, run, validate, RunError, RunOutcome, OUT_DIR_ENV};
