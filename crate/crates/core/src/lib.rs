//! Flow maps of control-family dynamical systems.
//!
//! The crate builds, composes and analyzes flow maps `φ_f^τ` of autonomous
//! vector fields drawn from control families such as affine fields plus `±f`.
//! It is organized the way the numerical work is organized:
//!
//! * [`fields`]: vector fields, Jacobians, Lie brackets and nonlinearity probes.
//! * [`flows`]: closed-form and integrated flows, flow programs, Jacobian
//!   determinants along trajectories.
//! * [`schemes`]: Lie–Trotter splitting, the four-flow commutator scheme,
//!   Grönwall error bounds and convergence-rate fitting.
//! * [`universality`]: ReLU surrogates, marginalization, span certificates and
//!   the exact interpolation engine.
//! * [`expcli`]: the experiment runner behind the `flowcap` binary.

pub mod error;
pub mod expcli;
pub mod fields;
pub mod flows;
pub mod linalg;
pub mod schemes;
pub mod universality;

pub use error::{Error, Result};
pub use fields::{Activation, AxisBox, FieldKind, NamedField, VectorField};
pub use flows::{Direction, FlowProgram, IntegratorConfig, Leg};

/// Column vector in `ℝ^d`.
pub type Vector = nalgebra::DVector<f64>;
/// Dense `d × d` (or `m × n`) real matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
