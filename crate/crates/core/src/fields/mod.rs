//! Vector fields on `ℝ^d` and the calculus the constructions need.

mod activation;
mod analysis;
mod domain;
mod field;
pub mod schema;

pub use activation::{softplus, Activation};
pub use analysis::{
    affine_fit_residual, coordinate_linear_direction, divergence, is_fully_coordinate_nonlinear, jacobian_fd,
    lie_bracket, lipschitz_estimate, slice_nonlinearity_test, sup_norm_estimate, SliceVerdict, SLICE_GRID,
};
pub use domain::AxisBox;
pub use field::{FieldKind, NamedField, VectorField};
