use std::f64::consts::PI;

use proptest::prelude::*;

use flowshift::calculus::{compose_shift_functions, kernel_membership, shift_map, PointMap};
use flowshift::diffeo::{diffeo_classify, lie_derivative, DiffeoClass};
use flowshift::flow::Flow;
use flowshift::grid::{Domain, Grid};
use flowshift::jordan::{jordan_exp, JordanSpec};
use flowshift::numeric::distance;
use flowshift::recovery::{hadamard_quotient, hadamard_quotient_with_derivative};
use flowshift::sampling::{random_alpha, random_point, random_spec, rng};
use flowshift::shift::ShiftFunction;

fn rotation() -> Flow {
    Flow::linear(JordanSpec::rotation(0.0, 1.0, 1).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_group_law(seed in any::<u64>(), t in -1.5f64..1.5, s in -1.5f64..1.5) {
        let mut r = rng(seed);
        let flow = Flow::linear(random_spec(&mut r, 8, 3.0));
        let x = random_point(&mut r, flow.dim(), 1.0);
        let lhs = flow.evaluate(&flow.evaluate(&x, t).unwrap(), s).unwrap();
        let rhs = flow.evaluate(&x, t + s).unwrap();
        let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(distance(&lhs, &rhs) <= 1e-10 * scale);
    }

    #[test]
    fn exponential_inverts_at_negative_time(seed in any::<u64>(), t in -2.0f64..2.0) {
        let spec = random_spec(&mut rng(seed), 10, 4.0);
        let id = jordan_exp(&spec, t) * jordan_exp(&spec, -t);
        let err = (id - nalgebra::DMatrix::identity(spec.dim(), spec.dim())).abs().max();
        prop_assert!(err <= 1e-8, "err {err}");
    }

    #[test]
    fn composed_shift_is_composition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let flow = Flow::linear(JordanSpec::rotation(-0.2, 1.3, 1).unwrap());
        let a = random_alpha(&mut r, 2, 1.0);
        let b = random_alpha(&mut r, 2, 1.0);
        let sigma = compose_shift_functions(&a, &b, &flow);
        let x = random_point(&mut r, 2, 1.0);
        let lhs = shift_map(&flow, &sigma).apply(&x).unwrap();
        let rhs = shift_map(&flow, &a).apply(&shift_map(&flow, &b).apply(&x).unwrap()).unwrap();
        prop_assert!(distance(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn kernel_cosets_give_the_same_map(seed in any::<u64>(), k in -3i32..=3) {
        let mut r = rng(seed);
        let flow = rotation();
        let a = random_alpha(&mut r, 2, 1.0);
        let shifted = a.offset(2.0 * PI * k as f64);
        let x = random_point(&mut r, 2, 1.0);
        let lhs = shift_map(&flow, &a).apply(&x).unwrap();
        let rhs = shift_map(&flow, &shifted).apply(&x).unwrap();
        prop_assert!(distance(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn hadamard_quotient_divides(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, c3 in -2.0f64..2.0, x in -1.0f64..1.0) {
        let f = |u: f64| c1 * u + c2 * u * u + c3 * u.sin() * u;
        let df = |u: f64| c1 + 2.0 * c2 * u + c3 * (u.sin() + u * u.cos());
        let phi = hadamard_quotient(f, x, 16);
        let exact = hadamard_quotient_with_derivative(df, x, 16);
        prop_assert!((phi - exact).abs() <= 1e-9);
        prop_assert!((x * exact - f(x)).abs() <= 1e-12);
    }

    #[test]
    fn lie_derivative_is_linear(seed in any::<u64>(), s in 0.0f64..1.0) {
        let mut r = rng(seed);
        let flow = rotation();
        let a0 = random_alpha(&mut r, 2, 1.0);
        let a1 = random_alpha(&mut r, 2, 1.0);
        let mix = ShiftFunction::convex_combination(s, &a0, &a1);
        let x = random_point(&mut r, 2, 1.0);
        let lhs = lie_derivative(&flow, &mix, &x).unwrap();
        let rhs = s * lie_derivative(&flow, &a0, &x).unwrap() + (1.0 - s) * lie_derivative(&flow, &a1, &x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constant_shifts_preserve_orientation(c in -5.0f64..5.0, seed in any::<u64>()) {
        let flow = Flow::linear(random_spec(&mut rng(seed), 2, 3.0));
        let grid = Grid::uniform(Domain::cube(flow.dim(), 1.0).unwrap(), 5).unwrap();
        let report = diffeo_classify(&flow, &ShiftFunction::constant(c), &grid, 1e-9).unwrap();
        prop_assert_eq!(report.classification, DiffeoClass::OrientationPreserving);
    }

    #[test]
    fn period_multiples_lie_in_the_kernel(k in 1i32..=4) {
        let grid = Grid::uniform(Domain::cube(2, 1.0).unwrap(), 5).unwrap();
        let nu = ShiftFunction::constant(2.0 * PI * k as f64);
        prop_assert!(kernel_membership(&rotation(), &nu, &grid, 1e-8));
        let off = ShiftFunction::constant(2.0 * PI * k as f64 + 0.1);
        prop_assert!(!kernel_membership(&rotation(), &off, &grid, 1e-8));
    }
}
