//! Constructions behind the approximation and interpolation results:
//! ReLU surrogates, broadcasting, marginal profiles, lifted span
//! certificates and exact interpolation by flow programs.

mod interpolation;
mod span;
mod surrogates;

pub use interpolation::{
    interpolate, legs_per_move, local_uip, local_uip_relu, max_residual, steer_leg_budget,
    steer_to_canonical, steer_to_canonical_in, CanonicalConfig, Interpolant, InterpolationFamily,
    InterpolationProblem, LOCAL_TOLERANCE,
};
pub use span::{
    lifted_row, sample_family_member, span_certificate, witness_holds_out_of_sample, SpanCertificate,
    SpanFamily, SpanSampler, SpanVerdict, DEFAULT_RANK_THRESHOLD, SAMPLE_RANGE,
};
pub use surrogates::{
    broadcast_coordinate, marginalize, permute_relu_expansion, profile_integral, relu_from_softplus,
    relu_from_sums, squeeze_conjugation, squeeze_matrix, Broadcast, RidgeFit, RidgeTerm, DEFAULT_TAIL_TOL,
};
