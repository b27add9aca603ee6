use cartan_dual::liealg::{
    bracket, cartan_split, dual_group_element, group_factorize, group_involution, killing_form, killing_theta_form,
    matrix_exp, matrix_log, polar_decompose, skew_residual, symmetric_residual, theta, trace_form, AlgebraElement,
    GroupElement,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn element(max_n: usize, scale: f64) -> impl Strategy<Value = AlgebraElement> {
    (2..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(-scale..scale, n * n)
            .prop_map(move |v| AlgebraElement::new(DMatrix::from_row_slice(n, n, &v)).unwrap())
    })
}

fn pair(max_n: usize, scale: f64) -> impl Strategy<Value = (AlgebraElement, AlgebraElement)> {
    (2..=max_n).prop_flat_map(move |n| {
        let m = move || {
            prop::collection::vec(-scale..scale, n * n)
                .prop_map(move |v| AlgebraElement::new(DMatrix::from_row_slice(n, n, &v)).unwrap())
        };
        (m(), m())
    })
}

proptest! {
    #[test]
    fn theta_is_an_involution(x in element(6, 10.0)) {
        prop_assert_eq!(theta(&theta(&x)), x);
    }

    #[test]
    fn theta_preserves_brackets((x, y) in pair(6, 1.0)) {
        let lhs = theta(&bracket(&x, &y).unwrap());
        let rhs = bracket(&theta(&x), &theta(&y)).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-12);
    }

    #[test]
    fn split_is_exact_and_typed(x in element(6, 5.0)) {
        let s = cartan_split(&x);
        prop_assert!(skew_residual(s.k_part.matrix()) == 0.0);
        prop_assert!(symmetric_residual(s.p_part.matrix()) == 0.0);
        prop_assert!((s.recombine().matrix() - x.matrix()).norm() <= 1e-14 * (1.0 + x.norm()));
        prop_assert!((theta(&s.k_part).matrix() - s.k_part.matrix()).norm() == 0.0);
        prop_assert!((theta(&s.p_part).matrix() + s.p_part.matrix()).norm() == 0.0);
    }

    #[test]
    fn bracket_relations((x, y) in pair(6, 1.0)) {
        let (a, b) = (cartan_split(&x), cartan_split(&y));
        prop_assert!(skew_residual(bracket(&a.k_part, &b.k_part).unwrap().matrix()) <= 1e-12);
        prop_assert!(symmetric_residual(bracket(&a.k_part, &b.p_part).unwrap().matrix()) <= 1e-12);
        prop_assert!(skew_residual(bracket(&a.p_part, &b.p_part).unwrap().matrix()) <= 1e-12);
    }

    #[test]
    fn killing_theta_form_is_nonnegative(x in element(6, 2.0)) {
        let b = killing_theta_form(&x, &x).unwrap();
        let n = x.order() as f64;
        // B_theta(x, x) = 2n |x|^2 - 2 tr(x)^2 >= 0 by Cauchy-Schwarz
        let expected = 2.0 * n * x.norm().powi(2) - 2.0 * x.matrix().trace().powi(2);
        prop_assert!(b >= -1e-12);
        prop_assert!((b - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
    }

    #[test]
    fn killing_form_is_invariant((x, y) in pair(5, 1.0), z in element(5, 1.0)) {
        prop_assume!(z.order() == x.order());
        let lhs = killing_form(&bracket(&x, &y).unwrap(), &z).unwrap();
        let rhs = killing_form(&x, &bracket(&y, &z).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9);
        let t = trace_form(&x, &y).unwrap();
        prop_assert!((t - trace_form(&y, &x).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn exp_log_round_trip(x in element(5, 0.3)) {
        let back = matrix_log(&matrix_exp(&x).unwrap()).unwrap();
        prop_assert!((back.matrix() - x.matrix()).norm() <= 1e-10);
    }

    #[test]
    fn group_involution_matches_algebra_involution(x in element(6, 0.5)) {
        let lhs = group_involution(&matrix_exp(&x).unwrap()).unwrap();
        let rhs = matrix_exp(&theta(&x)).unwrap();
        prop_assert!((lhs.matrix() - rhs.matrix()).norm() <= 1e-9);
    }

    #[test]
    fn polar_factors_reassemble(x in element(5, 1.0)) {
        let m = DMatrix::identity(x.order(), x.order()) * 2.0 + x.matrix();
        prop_assume!(m.determinant().abs() > 1e-3);
        let g = GroupElement::new(m.clone()).unwrap();
        let f = polar_decompose(&g).unwrap();
        prop_assert!((f.orthogonal.matrix() * f.positive.matrix() - &m).norm() <= 1e-9 * (1.0 + m.norm()));
        prop_assert!(f.orthogonal.orthogonality_residual() <= 1e-10);
        prop_assert!(symmetric_residual(f.positive.matrix()) <= 1e-10);
    }

    #[test]
    fn dual_factorization_identity(x in element(6, 0.4)) {
        let s = cartan_split(&x);
        let m = matrix_exp(&x).unwrap();
        let gs = group_factorize(&m).unwrap();
        let lhs = matrix_exp(&(&s.k_part - &s.p_part)).unwrap();
        let rhs = matrix_exp(&gs.k_log).unwrap().matrix() * matrix_exp(&(-&gs.p_log)).unwrap().matrix();
        prop_assert!((lhs.matrix() - rhs).norm() <= 1e-8);
        let dual = dual_group_element(&m).unwrap();
        prop_assert!((dual.matrix() - group_involution(&m).unwrap().matrix()).norm() <= 1e-9);
    }
}
