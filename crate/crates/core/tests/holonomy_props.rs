use std::sync::Arc;

use cartan_dual::connection::{loop_holonomy, ChartPoint, DomainBox, FnForm};
use cartan_dual::holonomy::{
    estimate_algebra_from_logs, rectangle_holonomy, rectangle_loop, sample_holonomy, RectangleLoopSpec,
    DEFAULT_ZERO_FLOOR,
};
use cartan_dual::liealg::AlgebraElement;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn element(n: usize) -> impl Strategy<Value = AlgebraElement> {
    prop::collection::vec(-1.0..1.0f64, n * n)
        .prop_map(move |v| AlgebraElement::new(DMatrix::from_row_slice(n, n, &v)).unwrap())
}

/// A curved skew 3x3 form on the plane.
fn rotating() -> FnForm {
    let dom = DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    FnForm::new("rot", 3, dom, |x: &[f64]| {
        let (a, b) = (x[0], x[1]);
        Ok(vec![
            DMatrix::from_row_slice(3, 3, &[0.0, b, 0.0, -b, 0.0, 0.3, 0.0, -0.3, 0.0]),
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, a, 0.0, 0.0, 0.0, -a, 0.0, 0.0]),
        ])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimated_dimension_is_monotone(logs in prop::collection::vec(element(3), 1..6), extra in element(3)) {
        let before = estimate_algebra_from_logs(&logs, false, 1e-8, DEFAULT_ZERO_FLOOR).unwrap();
        let mut more = logs.clone();
        more.push(extra);
        let after = estimate_algebra_from_logs(&more, false, 1e-8, DEFAULT_ZERO_FLOOR).unwrap();
        prop_assert!(after.dimension >= before.dimension);
        prop_assert!(before.dimension <= logs.len().min(9));
        let closed = estimate_algebra_from_logs(&logs, true, 1e-8, DEFAULT_ZERO_FLOOR).unwrap();
        prop_assert!(closed.dimension >= before.dimension);
    }

    #[test]
    fn skew_logs_estimate_inside_so(logs in prop::collection::vec(element(4), 1..5)) {
        let skew: Vec<AlgebraElement> = logs
            .iter()
            .map(|x| AlgebraElement::new(x.matrix() - x.matrix().transpose()).unwrap())
            .collect();
        let est = estimate_algebra_from_logs(&skew, true, 1e-8, DEFAULT_ZERO_FLOOR).unwrap();
        prop_assert!(est.in_so, "{} {} {}", est.so_residual, est.dimension, est.closed);
        prop_assert!(est.dimension <= 6);
    }

    #[test]
    fn rectangle_holonomy_matches_loop_holonomy(
        x0 in -0.9..0.5f64,
        y0 in -0.9..0.5f64,
        a in 0.05..0.4f64,
        b in 0.05..0.4f64,
    ) {
        let form = rotating();
        let spec = RectangleLoopSpec { base: vec![x0, y0], axes: (0, 1), sides: (a, b) };
        let lp = rectangle_loop(&spec, 2, &form_domain()).unwrap();
        prop_assert_eq!(lp.base_point(), vec![x0, y0]);
        let h1 = rectangle_holonomy(&form, &spec, 256).unwrap();
        let h2 = loop_holonomy(&lp, &form, 256).unwrap();
        prop_assert!((h1.matrix() - h2.matrix()).norm() <= 1e-9);
        prop_assert!(h1.orthogonality_residual() <= 1e-10);
    }
}

fn form_domain() -> DomainBox {
    DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
}

#[test]
fn sampling_is_reproducible_and_seed_sensitive() {
    let form = Arc::new(rotating());
    let base = ChartPoint::new(vec![0.0, 0.0]).unwrap();
    let a = sample_holonomy(form.as_ref(), &base, 12, 0.3, 7, 128).unwrap();
    let b = sample_holonomy(form.as_ref(), &base, 12, 0.3, 7, 128).unwrap();
    let c = sample_holonomy(form.as_ref(), &base, 12, 0.3, 8, 128).unwrap();
    let logs = |s: &[cartan_dual::holonomy::HolonomySample]| s.iter().map(|x| x.log.to_rows()).collect::<Vec<_>>();
    assert_eq!(logs(&a), logs(&b));
    assert_ne!(logs(&a), logs(&c));
}
