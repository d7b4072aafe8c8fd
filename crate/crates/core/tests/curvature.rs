use nalgebra::DMatrix;
use proptest::prelude::*;
use warpmass::curvature::{
    classify_conformal_flatness, cotton, cotton_line_times_surface, kulkarni_nomizu,
    product_curvature, weyl, ConstantCurvatureFactor, FlatnessVerdict, FLATNESS_TOLERANCE,
};
use warpmass::Error;

fn factor(dim: usize, kappa: f64) -> ConstantCurvatureFactor {
    ConstantCurvatureFactor::new(dim, kappa).unwrap()
}

#[test]
fn space_form_is_half_kulkarni_nomizu_square() {
    let g = DMatrix::identity(4, 4);
    let gg = kulkarni_nomizu(&g, &g).unwrap();
    let r = product_curvature(&[factor(4, 1.5)]).unwrap();
    for (a, b) in r.components.iter().zip(&gg.components) {
        assert!((a - 0.75 * b).abs() < 1e-14);
    }
    assert!(weyl(&r, &g).unwrap().max_abs() < 1e-14);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(matches!(
        weyl(
            &product_curvature(&[factor(3, 1.0)]).unwrap(),
            &DMatrix::identity(3, 3)
        ),
        Err(Error::DimensionTooSmall(3))
    ));
    assert!(matches!(
        classify_conformal_flatness(&[factor(2, 1.0)]),
        Err(Error::InvalidFactorization(_))
    ));
    assert!(matches!(
        kulkarni_nomizu(&DMatrix::identity(2, 2), &DMatrix::identity(3, 3)),
        Err(Error::DimensionMismatch(_))
    ));
    assert!(ConstantCurvatureFactor::new(0, 1.0).is_err());
    assert_eq!(factor(1, 3.0).kappa, 0.0);
}

#[test]
fn cotton_of_line_times_surface() {
    assert_eq!(
        cotton(&[factor(1, 0.0), factor(2, 1.0)]).unwrap().max_abs(),
        0.0
    );
    // a non-constant surface curvature leaves a nonzero Cotton tensor
    assert!(cotton_line_times_surface([0.3, -0.1]).max_abs() > 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn product_curvature_has_algebraic_symmetries(m1 in 1usize..4, m2 in 1usize..4, k1 in -3.0f64..3.0, k2 in -3.0f64..3.0) {
        prop_assume!(m1 + m2 >= 3);
        let r = product_curvature(&[factor(m1, k1), factor(m2, k2)]).unwrap();
        prop_assert!(r.symmetry_defect() < 1e-13);
        let g = DMatrix::identity(m1 + m2, m1 + m2);
        let expected = factor(m1, k1).scal() + factor(m2, k2).scal();
        prop_assert!((r.scal(&g).unwrap() - expected).abs() < 1e-12);
        if m1 + m2 >= 4 {
            let w = weyl(&r, &g).unwrap();
            prop_assert!(w.trace_defect(&g).unwrap() < 1e-12);
            prop_assert!(w.symmetry_defect() < 1e-12);
        }
    }

    #[test]
    fn verdict_matches_tensor(m1 in 1usize..4, m2 in 1usize..4, k1 in -3.0f64..3.0, k2 in -3.0f64..3.0, flip in any::<bool>()) {
        prop_assume!(m1 + m2 >= 3);
        let k2 = if flip { -k1 } else { k2 };
        let c = classify_conformal_flatness(&[factor(m1, k1), factor(m2, k2)]).unwrap();
        let predicate = m1.min(m2) == 1 || k1 == -k2;
        prop_assert_eq!(c.verdict == FlatnessVerdict::ConformallyFlat, predicate);
        if predicate {
            prop_assert!(c.max_abs_tensor <= FLATNESS_TOLERANCE);
        } else {
            prop_assert!(c.max_abs_tensor > 0.0);
        }
        if predicate && m1.min(m2) > 1 {
            prop_assert!(c.scal_identity.abs() < 1e-12);
        }
    }
}
