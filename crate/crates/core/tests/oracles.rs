//! Worked examples with values fixed in advance, read off closed forms or
//! derived independently by hand.

use flowcap::fields::{divergence, lie_bracket, lipschitz_estimate, slice_nonlinearity_test};
use flowcap::flows::{
    conjugated_field, conjugated_flow, flow, flow_affine, flow_mobius_1d, flow_numeric, flow_relu,
    jacobian_det_along_flow, scaled_shift_field, scaled_shift_flow, ReluSign,
};
use flowcap::universality::{
    interpolate, marginalize, profile_integral, relu_from_softplus, relu_from_sums, span_certificate,
    squeeze_conjugation, steer_leg_budget, steer_to_canonical, CanonicalConfig, InterpolationFamily,
    InterpolationProblem, SpanFamily, SpanSampler,
};
use flowcap::{
    Activation, AxisBox, Error, FlowProgram, IntegratorConfig, Leg, Matrix, NamedField, Vector, VectorField,
};
use std::f64::consts::{LN_2, PI};

fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

fn close(a: &Vector, b: &Vector, tol: f64) -> bool {
    (a - b).amax() <= tol
}

#[test]
fn permute_relu_values() {
    let f = VectorField::named(NamedField::PermuteRelu, 2).unwrap();
    assert_eq!(f.eval(&v(&[2.0, -3.0])).unwrap(), v(&[0.0, 2.0]));
    let grid = AxisBox::cube(2, -3.0, 3.0).unwrap().halton_points(200);
    for x in grid {
        assert_eq!(divergence(&f, &x).unwrap(), 0.0);
    }
}

#[test]
fn relu_jacobian_and_divergence() {
    let relu = VectorField::relu(2).unwrap();
    assert_eq!(
        relu.jacobian(&v(&[2.0, -2.0])).unwrap(),
        Matrix::from_diagonal(&v(&[1.0, 0.0]))
    );
    assert_eq!(divergence(&relu, &v(&[1.0, 1.0])).unwrap(), 2.0);
}

#[test]
fn bracket_values() {
    let sq = VectorField::elementwise(Activation::Monomial { power: 2 }, 1).unwrap();
    let cube = VectorField::elementwise(Activation::Monomial { power: 3 }, 1).unwrap();
    assert!((lie_bracket(&sq, &cube, &v(&[2.0])).unwrap()[0] - 16.0).abs() < 1e-12);
    let e12 = VectorField::linear(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
    let e21 = VectorField::linear(Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])).unwrap();
    assert_eq!(lie_bracket(&e12, &e21, &v(&[1.0, 1.0])).unwrap(), v(&[-1.0, 1.0]));
}

#[test]
fn lipschitz_values() {
    let relu = VectorField::relu(3).unwrap();
    let cube = AxisBox::cube(3, -1.0, 1.0).unwrap();
    assert_eq!(lipschitz_estimate(&relu, &cube, 64).unwrap(), 1.0);
    let sp = VectorField::elementwise(Activation::Softplus { sharpness: 4.0 }, 1).unwrap();
    let line = AxisBox::cube(1, -1.0, 1.0).unwrap();
    let want = 4.0 / (1.0 + (-4.0f64).exp());
    assert!((lipschitz_estimate(&sp, &line, 64).unwrap() - want).abs() < 1e-12);
}

#[test]
fn slice_verdicts() {
    let relu = VectorField::relu(2).unwrap();
    let zero = [Vector::zeros(2)];
    assert!(slice_nonlinearity_test(&relu, 0, 0, &zero, (-1.0, 1.0), None)
        .unwrap()
        .is_nonlinear());
    let f = VectorField::named(NamedField::PermuteRelu, 2).unwrap();
    let shifts = [v(&[0.0, 0.5]), v(&[0.0, -0.5])];
    assert!(!slice_nonlinearity_test(&f, 0, 0, &shifts, (-1.0, 1.0), None)
        .unwrap()
        .is_nonlinear());
    assert!(slice_nonlinearity_test(&f, 0, 1, &zero, (-1.0, 1.0), None)
        .unwrap()
        .is_nonlinear());
}

#[test]
fn closed_form_flow_values() {
    let a = Matrix::from_diagonal(&v(&[1.0, -1.0]));
    let y = flow_affine(&a, &Vector::zeros(2), LN_2, &v(&[1.0, 1.0])).unwrap();
    assert!(close(&y, &v(&[2.0, 0.5]), 1e-14));
    let y = flow_affine(&Matrix::zeros(2, 2), &v(&[1.0, 0.0]), 2.0, &Vector::zeros(2)).unwrap();
    assert!(close(&y, &v(&[2.0, 0.0]), 1e-14));
    assert!(close(
        &flow_relu(ReluSign::Positive, LN_2, &v(&[1.0, -1.0])),
        &v(&[2.0, -1.0]),
        1e-15
    ));
    assert!(close(
        &flow_relu(ReluSign::Negative, LN_2, &v(&[4.0, -3.0])),
        &v(&[2.0, -3.0]),
        1e-15
    ));
    assert_eq!(flow_mobius_1d(0.5, 1.0).unwrap(), 2.0);
    assert!(matches!(flow_mobius_1d(1.0, 1.0), Err(Error::PoleReached { .. })));
}

#[test]
fn numeric_flow_values() {
    let cfg = IntegratorConfig::with_steps(1000);
    let quad = VectorField::elementwise(Activation::Quadratic1d, 1).unwrap();
    let y = flow_numeric(&quad, 0.5, &v(&[1.0]), &cfg).unwrap();
    assert!((y[0] - 2.0).abs() < 1e-6);
    let a = Matrix::from_row_slice(2, 2, &[0.3, -1.0, 0.8, -0.2]);
    let b = v(&[0.5, -0.1]);
    let f = VectorField::affine(a.clone(), b.clone()).unwrap();
    for x in AxisBox::cube(2, -2.0, 2.0).unwrap().halton_points(50) {
        let num = flow_numeric(&f, 1.0, &x, &cfg).unwrap();
        assert!(close(&num, &flow_affine(&a, &b, 1.0, &x).unwrap(), 1e-8));
    }
}

#[test]
fn program_values() {
    let relu = VectorField::relu(2).unwrap();
    let p = FlowProgram::from_legs(
        2,
        vec![
            Leg::forward(relu.clone(), LN_2).unwrap(),
            Leg::forward(relu.negated(), LN_2).unwrap(),
        ],
    )
    .unwrap();
    assert!(close(
        &p.apply(&v(&[3.0, -3.0])).unwrap(),
        &v(&[3.0, -3.0]),
        1e-14
    ));

    let single = FlowProgram::from_legs(2, vec![Leg::forward(relu, 0.7).unwrap()]).unwrap();
    let x = v(&[1.5, -0.5]);
    let back = single.invert().apply(&single.apply(&x).unwrap()).unwrap();
    assert!(close(&back, &x, 4.0 * f64::EPSILON * 1.5));

    let aff = VectorField::affine(
        Matrix::from_row_slice(2, 2, &[0.2, 1.0, -0.4, 0.1]),
        v(&[0.3, -0.7]),
    )
    .unwrap();
    let p = FlowProgram::from_legs(2, vec![Leg::forward(aff, 0.9).unwrap()]).unwrap();
    for x in AxisBox::cube(2, -2.0, 2.0).unwrap().halton_points(40) {
        assert!(close(&p.invert().apply(&p.apply(&x).unwrap()).unwrap(), &x, 1e-9));
    }
}

#[test]
fn conjugation_values() {
    let cfg = IntegratorConfig::with_steps(1000);
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let axis = VectorField::single_axis(Activation::Relu, 2, 0).unwrap();
    let h = conjugated_field(&axis, &a, &Vector::zeros(2)).unwrap();
    for x in AxisBox::cube(2, -2.0, 2.0).unwrap().halton_points(100) {
        assert_eq!(h.eval(&x).unwrap(), v(&[0.0, x[1].max(0.0)]));
    }

    let relu = VectorField::relu(2).unwrap();
    let m = Matrix::from_row_slice(2, 2, &[1.2, 0.4, -0.3, 0.9]);
    let b = v(&[0.1, -0.2]);
    let hf = conjugated_field(&relu, &m, &b).unwrap();
    for x in AxisBox::cube(2, -1.0, 1.0).unwrap().halton_points(40) {
        let exact = conjugated_flow(&relu, &m, &b, 0.3, &x, &cfg).unwrap();
        assert!(close(&exact, &flow_numeric(&hf, 0.3, &x, &cfg).unwrap(), 1e-6));
    }

    let one = v(&[1.0]);
    let relu1 = VectorField::relu(1).unwrap();
    let y = scaled_shift_flow(&relu1, 1.0, 2.0, &Vector::zeros(1), LN_2 / 2.0, &one, &cfg).unwrap();
    assert!((y[0] - 2.0).abs() < 1e-14);
    let g = scaled_shift_field(&relu1, 1.0, 2.0, &Vector::zeros(1)).unwrap();
    let num = flow_numeric(&g, LN_2 / 2.0, &one, &cfg).unwrap();
    assert!((num[0] - 2.0).abs() < 1e-8);
}

#[test]
fn liouville_values() {
    let cfg = IntegratorConfig::default();
    let a = Matrix::from_row_slice(2, 2, &[0.5, 2.0, -1.0, -0.2]);
    let f = VectorField::linear(a.clone()).unwrap();
    let p = FlowProgram::from_legs(2, vec![Leg::forward(f, 1.5).unwrap()]).unwrap();
    let ts = [0.0, 0.5, 1.5];
    let dets = jacobian_det_along_flow(&p, &v(&[0.3, -0.4]), &ts, &cfg).unwrap();
    for (t, d) in ts.iter().zip(dets) {
        assert!((d - (t * a.trace()).exp()).abs() < 1e-8);
    }
}

#[test]
fn softplus_values() {
    let (g, dev) = relu_from_softplus(64.0, 1).unwrap();
    assert_eq!(dev, LN_2 / 64.0);
    assert!((g.eval(&v(&[0.0])).unwrap()[0] - dev).abs() < 1e-17);
    let (g4, _) = relu_from_softplus(4.0, 1).unwrap();
    assert!(g4.eval(&v(&[10.0])).unwrap()[0] - 10.0 <= 1e-6);

    let cfg = IntegratorConfig::default();
    let relu = VectorField::relu(1).unwrap();
    let line = AxisBox::cube(1, -2.0, 2.0).unwrap();
    let bound = flowcap::schemes::gronwall_bound(&relu, &line, 1.0, dev)
        .unwrap()
        .bound;
    for x in line.halton_points(30) {
        let gap = flow_numeric(&g, 1.0, &x, &cfg).unwrap() - flow(&relu, 1.0, &x, &cfg).unwrap();
        assert!(gap.amax() <= bound);
    }
}

#[test]
fn sine_sums_fit_relu() {
    let b = AxisBox::cube(1, -PI, PI).unwrap();
    assert!(relu_from_sums(Activation::Sin, &b, 32, 0.05).unwrap().residual <= 0.05);
}

#[test]
fn marginal_and_squeeze_values() {
    let gauss = VectorField::named(NamedField::Gauss, 2).unwrap();
    let bar = marginalize(&gauss, 8.0, 400, 1e-6).unwrap();
    for x in AxisBox::cube(2, -2.0, 2.0).unwrap().halton_points(50) {
        let want = PI.sqrt() * (-x[0] * x[0]).exp();
        assert!((bar.eval(&x).unwrap()[0] - want).abs() < 1e-6);
    }
    // ∫∫ e^{-x²-y²} = π
    assert!((profile_integral(&bar, -8.0, 8.0, 801).unwrap()[0] - PI).abs() < 1e-6);

    let eps = 0.1;
    let sq = squeeze_conjugation(&bar, eps).unwrap();
    let mut worst = 0.0f64;
    let mut second = 0.0f64;
    for x in AxisBox::cube(2, -2.0, 2.0).unwrap().halton_points(200) {
        let fx = bar.eval(&x).unwrap();
        let gx = sq.eval(&x).unwrap();
        worst = worst.max(((gx[0] - fx[0]).powi(2) + gx[1].powi(2)).sqrt());
        second = second.max(fx[1].abs());
    }
    assert!((worst - eps * second).abs() < 1e-12);
}

#[test]
fn span_values() {
    let sinsum = VectorField::named(NamedField::Sinsum, 2).unwrap();
    let square: Vec<Vector> = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]
        .iter()
        .map(|p| v(p))
        .collect();
    let cert = span_certificate(&sinsum, SpanFamily::Diag, &square, SpanSampler::seeded(1), 1e-10).unwrap();
    let w = cert.witness().unwrap();
    assert!(close(&w, &v(&[0.5, -0.5, 0.5, -0.5, 0.0, 0.0, 0.0, 0.0]), 1e-6));
    let increasing = [
        v(&[-1.5, -1.0]),
        v(&[-0.2, 0.3]),
        v(&[0.4, 0.9]),
        v(&[1.3, 1.7]),
        v(&[1.9, 2.0]),
    ];
    for n in 1..=5 {
        let c = span_certificate(
            &sinsum,
            SpanFamily::Diag,
            &increasing[..n],
            SpanSampler::seeded(2),
            1e-10,
        )
        .unwrap();
        assert!(c.is_full_rank(), "N = {n}");
    }
}

#[test]
fn interpolation_values() {
    let cfg = CanonicalConfig::new(2, 2).unwrap();
    let pts = [v(&[0.0, 0.0]), v(&[1.0, 1.0])];
    let p = steer_to_canonical(&pts, &cfg).unwrap();
    for (i, x) in pts.iter().enumerate() {
        assert!((p.apply(x).unwrap() - cfg.point(i)).norm() < cfg.radius());
    }
    assert!(p.len() <= steer_leg_budget(2, 2, &InterpolationFamily::AssRelu));

    // one point strictly inside the triangle of the other three
    let inner = [v(&[0.0, 0.0]), v(&[4.0, 0.0]), v(&[0.0, 4.0]), v(&[1.0, 1.0])];
    let targets = [v(&[1.0, -1.0]), v(&[-2.0, 0.5]), v(&[0.3, 2.0]), v(&[2.0, 2.0])];
    let problem = InterpolationProblem::new(inner.to_vec(), targets.to_vec(), 1e-6).unwrap();
    let sol = interpolate(&problem, &InterpolationFamily::AssRelu).unwrap();
    assert!(problem.residual(&sol.program).unwrap() <= 1e-6);

    let single = InterpolationProblem::new(vec![v(&[0.5, 0.5])], vec![v(&[-1.0, 2.0])], 1e-12).unwrap();
    let sol = interpolate(&single, &InterpolationFamily::AssRelu).unwrap();
    assert_eq!(single.residual(&sol.program).unwrap(), 0.0);

    let line = |xs: &[f64]| xs.iter().map(|&x| v(&[x])).collect::<Vec<_>>();
    assert!(matches!(
        InterpolationProblem::new(line(&[1.0, 2.0]), line(&[5.0, 3.0]), 1e-6),
        Err(Error::InvalidProblem(_))
    ));
}
