//! Built-in example configs, one per worked example.

macro_rules! embed {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../configs/", $name, ".json")))),*]
    };
}

/// `(name, json)` pairs.
pub const EXAMPLES: &[(&str, &str)] = embed!(
    "approx_relu",
    "commutator_linear",
    "commutator_quadratic",
    "counterexample_permute_relu",
    "gronwall_softplus",
    "interpolate_aff_relu",
    "interpolate_line",
    "interpolate_relu",
    "lie_trotter_affine",
    "lie_trotter_relu",
    "rank_sinsum_increasing",
    "rank_sinsum_symmetric",
);

pub fn example(name: &str) -> Option<&'static str> {
    EXAMPLES.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
