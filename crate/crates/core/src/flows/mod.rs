//! Flow maps `φ_f^τ`, flow programs and Jacobian determinants along flows.

mod closed;
mod integrator;
mod jacobian;
mod program;
mod volume;

pub use closed::{
    conjugated_field, conjugated_flow, flow, flow_affine, flow_mobius_1d, flow_relu, has_closed_form,
    scaled_shift_field, scaled_shift_flow, FlowMap, ReluSign,
};
pub use integrator::{flow_numeric, IntegratorConfig};
pub use jacobian::{jacobian_det_along_flow, log_det_along_flow, write_det_csv};
pub use program::{CompiledProgram, Direction, FlowProgram, Leg};
pub use volume::{region_volume_mc, volume_comparison, volume_comparison_map, Region, VolumeEstimate};
