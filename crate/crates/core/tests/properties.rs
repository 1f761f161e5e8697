use flowcap::expcli::{random_ass_program, random_problem, RandomProblem};
use flowcap::fields::{jacobian_fd, lie_bracket};
use flowcap::flows::{flow_affine, jacobian_det_along_flow, FlowMap};
use flowcap::schemes::{gronwall_bound, lie_trotter};
use flowcap::universality::{
    broadcast_coordinate, interpolate, local_uip_relu, relu_from_softplus, span_certificate,
    witness_holds_out_of_sample, CanonicalConfig, InterpolationFamily, SpanFamily, SpanSampler,
};
use flowcap::{Activation, AxisBox, FlowProgram, IntegratorConfig, Matrix, NamedField, Vector, VectorField};
use proptest::prelude::*;

fn vec_in(dim: usize, r: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-r..r, dim).prop_map(Vector::from_vec)
}

fn mat_in(dim: usize, r: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-r..r, dim * dim).prop_map(move |v| Matrix::from_row_slice(dim, dim, &v))
}

fn smooth_activation() -> impl Strategy<Value = Activation> {
    prop_oneof![
        (0.5..8.0f64).prop_map(|a| Activation::Softplus { sharpness: a }),
        Just(Activation::Sin),
        Just(Activation::Cos),
        (2u32..5).prop_map(|p| Activation::Monomial { power: p }),
        (-1.0..1.0f64, 0.5..2.0f64).prop_map(|(c, w)| Activation::Gaussian { center: c, width: w }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric(a in mat_in(2, 1.0), act in smooth_activation(), x in vec_in(2, 1.5)) {
        let f = VectorField::linear(a).unwrap();
        let g = VectorField::elementwise(act, 2).unwrap();
        let fg = lie_bracket(&f, &g, &x).unwrap();
        let gf = lie_bracket(&g, &f, &x).unwrap();
        prop_assert!((fg + gf).amax() <= 1e-10);
    }

    #[test]
    fn linear_bracket_is_the_matrix_commutator(a in mat_in(3, 1.0), b in mat_in(3, 1.0), x in vec_in(3, 2.0)) {
        let f = VectorField::linear(a.clone()).unwrap();
        let g = VectorField::linear(b.clone()).unwrap();
        let want = (&b * &a - &a * &b) * &x;
        prop_assert!((lie_bracket(&f, &g, &x).unwrap() - want).amax() <= 1e-10);
    }

    #[test]
    fn activation_derivative_matches_central_difference(act in smooth_activation(), t in -2.0..2.0f64) {
        let h = 1e-5;
        let fd = (act.eval(t + h) - act.eval(t - h)) / (2.0 * h);
        prop_assert!((act.derivative(t) - fd).abs() <= 1e-6 * (1.0 + fd.abs()));
    }

    #[test]
    fn analytic_jacobian_matches_finite_difference(
        act in smooth_activation(),
        w in mat_in(2, 1.0),
        s in mat_in(2, 1.0),
        x in vec_in(2, 1.5),
    ) {
        let base = VectorField::elementwise(act, 2).unwrap();
        let f = VectorField::conjugated(s, w, Vector::zeros(2), base).unwrap();
        let fd = jacobian_fd(|y| f.eval(y), &x).unwrap();
        prop_assert!((f.jacobian(&x).unwrap() - fd).amax() <= 1e-6);
    }

    #[test]
    fn permute_relu_is_divergence_free(x in vec_in(2, 3.0)) {
        prop_assume!(x[0].abs() > 1e-6 && x[1].abs() > 1e-6);
        let f = VectorField::named(NamedField::PermuteRelu, 2).unwrap();
        prop_assert_eq!(f.jacobian(&x).unwrap().trace(), 0.0);
    }

    #[test]
    fn affine_flows_form_a_semigroup(
        a in mat_in(2, 1.0),
        b in vec_in(2, 1.0),
        s in prop::sample::select(vec![0.1, 0.7, 1.3]),
        t in prop::sample::select(vec![0.1, 0.7, 1.3]),
        x in vec_in(2, 2.0),
    ) {
        let once = flow_affine(&a, &b, s + t, &x).unwrap();
        let twice = flow_affine(&a, &b, s, &flow_affine(&a, &b, t, &x).unwrap()).unwrap();
        prop_assert!((once - twice).amax() <= 1e-10);
    }

    #[test]
    fn permute_relu_flow_is_a_semigroup(s in 0.0..1.5f64, t in 0.0..1.5f64, x in vec_in(2, 2.0)) {
        let f = VectorField::named(NamedField::PermuteRelu, 2).unwrap();
        let cfg = IntegratorConfig::default();
        let whole = FlowMap::new(&f, s + t, &cfg).unwrap();
        prop_assert!(whole.is_closed_form());
        let first = FlowMap::new(&f, t, &cfg).unwrap();
        let second = FlowMap::new(&f, s, &cfg).unwrap();
        let once = whole.apply(&x).unwrap();
        let twice = second.apply(&first.apply(&x).unwrap()).unwrap();
        prop_assert!((&once - twice).amax() <= 1e-10 * (1.0 + once.amax()));
    }

    #[test]
    fn programs_round_trip(seed in 0u64..1000, index in 0u64..8, x in vec_in(2, 1.0)) {
        let relu = VectorField::relu(2).unwrap();
        let p = random_ass_program(&relu, 5, seed, index).unwrap();
        let back = p.invert().apply(&p.apply(&x).unwrap()).unwrap();
        prop_assert!((back - x).amax() <= 1e-6);
    }

    #[test]
    fn line_programs_are_increasing(seed in 0u64..1000, x in -2.0..2.0f64, gap in 1e-3..1.0f64) {
        let relu = VectorField::relu(1).unwrap();
        let p = random_ass_program(&relu, 6, seed, 0).unwrap();
        let lo = p.apply(&Vector::from_element(1, x)).unwrap()[0];
        let hi = p.apply(&Vector::from_element(1, x + gap)).unwrap()[0];
        prop_assert!(lo < hi);
    }

    #[test]
    fn liouville_matches_finite_difference(seed in 0u64..1000, x in vec_in(2, 1.0)) {
        let f = VectorField::elementwise(Activation::Softplus { sharpness: 2.0 }, 2).unwrap();
        let p = random_ass_program(&f, 4, seed, 0).unwrap();
        let cfg = IntegratorConfig::with_steps(2000);
        let t = p.total_duration();
        let det = jacobian_det_along_flow(&p, &x, &[t], &cfg).unwrap()[0];
        let fd = jacobian_fd(|y| p.apply_with(y, &cfg), &x).unwrap().determinant();
        prop_assert!((det.ln() - fd.ln()).abs() <= 1e-4);
    }

    #[test]
    fn commuting_terms_split_exactly(
        b1 in vec_in(2, 1.0),
        b2 in vec_in(2, 1.0),
        n in 1usize..20,
        x in vec_in(2, 2.0),
    ) {
        let terms = vec![
            (1.0, VectorField::constant(b1.clone()).unwrap()),
            (0.5, VectorField::constant(b2.clone()).unwrap()),
        ];
        let cfg = IntegratorConfig::default();
        let got = lie_trotter(&terms, 1.3, n, &x, &cfg).unwrap();
        let want = &x + (b1 + b2 * 0.5) * 1.3;
        prop_assert!((got - want).amax() <= 1e-10);
    }

    #[test]
    fn gronwall_bound_formula(delta in 0.0..1.0f64, tau in 0.05..1.5f64, a in mat_in(2, 1.0)) {
        let f = VectorField::linear(a).unwrap();
        let domain = AxisBox::cube(2, -1.0, 1.0).unwrap();
        let g = gronwall_bound(&f, &domain, tau, delta).unwrap();
        let l = g.lipschitz;
        let want = if l * tau < 1e-12 { delta * tau } else { delta * (l * tau).exp_m1() / l };
        prop_assert!((g.bound - want).abs() <= 1e-12 * (1.0 + want));
        let radius = (g.sup_norm + 1.0) * tau * (l * tau).exp();
        prop_assert!((g.inflation_radius - radius).abs() <= 1e-12 * (1.0 + radius));
    }

    #[test]
    fn softplus_deviation_peaks_at_zero(a in 0.5..64.0f64, t in 0.0..5.0f64, dt in 0.0..1.0f64) {
        let (g, dev) = relu_from_softplus(a, 1).unwrap();
        let gap = |s: f64| g.eval(&Vector::from_element(1, s)).unwrap()[0] - s.max(0.0);
        prop_assert!((gap(0.0) - dev).abs() <= 1e-15);
        // the gap sits at rounding level far out in the tails
        let ulp = 4.0 * f64::EPSILON * (1.0 + t + dt);
        prop_assert!(gap(t + dt) <= gap(t) + ulp && gap(-t - dt) <= gap(-t) + ulp);
        prop_assert!(gap(t) <= dev && gap(-t) <= dev);
    }

    #[test]
    fn broadcasts_sum_to_elementwise_relu(x in vec_in(3, 3.0)) {
        let axis = VectorField::single_axis(Activation::Relu, 3, 0).unwrap();
        let mut total = axis.eval(&x).unwrap();
        for j in 1..3 {
            total += broadcast_coordinate(&axis, 0, j).unwrap().field.eval(&x).unwrap();
        }
        prop_assert_eq!(total, x.map(|v| v.max(0.0)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn interpolants_hit_targets_with_family_legs(seed in 0u64..10_000, n in 1usize..6, dim in 1usize..4) {
        let problem = random_problem(&RandomProblem { n, dim, scale: 2.0 }, seed, 1e-6).unwrap();
        for family in [
            InterpolationFamily::AssRelu,
            InterpolationFamily::Aff(VectorField::relu(dim).unwrap()),
        ] {
            let sol = interpolate(&problem, &family).unwrap();
            prop_assert!(problem.residual(&sol.program).unwrap() <= 1e-6);
            prop_assert!(sol.program.legs().iter().all(|l| family.contains_leg(l)));
        }
    }

    #[test]
    fn local_stage_hits_nearby_targets(
        offsets in prop::collection::vec(vec_in(2, 1.0), 1..6),
    ) {
        let n = offsets.len();
        let cfg = CanonicalConfig::new(n, 2).unwrap();
        let targets: Vec<Vector> = offsets
            .iter()
            .enumerate()
            .map(|(i, o)| cfg.point(i) + o * (0.99 * cfg.radius() / o.norm().max(1.0)))
            .collect();
        let p: FlowProgram = local_uip_relu(&cfg, &targets).unwrap();
        for (i, y) in targets.iter().enumerate() {
            prop_assert!((p.apply(&cfg.point(i)).unwrap() - y).norm() <= 1e-9);
        }
    }

    #[test]
    fn witnesses_hold_out_of_sample(seed in 0u64..1000) {
        let f = VectorField::named(NamedField::Sinsum, 2).unwrap();
        let square: Vec<Vector> = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]
            .iter()
            .map(|p| Vector::from_row_slice(p))
            .collect();
        let cert = span_certificate(&f, SpanFamily::Diag, &square, SpanSampler::seeded(seed), 1e-10).unwrap();
        let c = cert.witness().unwrap();
        prop_assert!((c.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(witness_holds_out_of_sample(&cert, &f, 100, seed + 1).unwrap());
    }

    #[test]
    fn extra_rows_keep_full_rank(seed in 0u64..1000, extra in 1usize..32) {
        let f = VectorField::named(NamedField::Sinsum, 2).unwrap();
        let pts = flowcap::expcli::increasing_configuration(3, 2, seed).unwrap();
        let base = span_certificate(&f, SpanFamily::Diag, &pts, SpanSampler { count: Some(24), seed }, 1e-10).unwrap();
        let more = span_certificate(&f, SpanFamily::Diag, &pts, SpanSampler { count: Some(24 + extra), seed }, 1e-10).unwrap();
        prop_assert!(!base.is_full_rank() || more.is_full_rank());
    }
}
