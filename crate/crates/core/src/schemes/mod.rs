//! Splitting and commutator schemes, their error bounds and measured orders.

mod convergence;
mod gronwall;
mod splitting;

pub use convergence::{
    doubling_grid, fit_convergence, sup_error, sup_error_on, ConvergenceReport, MEASURE_POINTS,
};
pub use gronwall::{gronwall_bound, gronwall_factor, GronwallBound, GRONWALL_SAMPLES};
pub use splitting::{
    commutator_map, commutator_program, commutator_scheme, lie_trotter, lie_trotter_map, lie_trotter_program,
    IteratedMap,
};
