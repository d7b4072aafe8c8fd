use std::sync::Arc;

use proptest::prelude::*;
use warpmass::geometry::{ClosedFactorData, ModelSpace, WarpingProfile};
use warpmass::green::{GreenModeTable, MassDiagnostics, MassEstimate};
use warpmass::yamabe::{
    quotient, scaling_reference, schoen_sweep, schoen_test, EnergyForm, FiberProfile,
    RadialTestFunction, SchoenConfig,
};
use warpmass::Error;

fn euclidean(m: usize) -> ModelSpace {
    ModelSpace::new(
        ClosedFactorData::point(),
        m - 1,
        WarpingProfile::linear(0.0).unwrap(),
    )
    .unwrap()
}

/// Bubble shifted down by its value at `cut`, so that it vanishes continuously there.
fn clamped_bubble(m: usize, eps: f64, cut: f64) -> RadialTestFunction {
    let b = FiberProfile::bubble(m, eps, cut).unwrap();
    let edge = b.eval(cut)[0];
    let inner = b.clone();
    let profile = Arc::new(move |r: f64| {
        let [u, du, d2u] = inner.eval(r);
        [u - edge, du, d2u]
    });
    RadialTestFunction::Fiber(
        FiberProfile::new(profile, 0.0, cut, b.kinks.clone(), b.scale).unwrap(),
    )
}

fn fake_mass(mass_term: f64, uncertainty: f64) -> MassEstimate {
    MassEstimate {
        leading_coefficient: 1.0,
        leading_reference: 1.0,
        mass_term,
        uncertainty,
        diagnostics: MassDiagnostics {
            window: (0.02, 0.2),
            residual: 0.0,
            extrapolation_order: 3,
            order_estimates: vec![],
            nuisance: vec![],
            log_amplitude: None,
            coordinates: String::new(),
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    /// The Euclidean quotient is invariant under dilation and under scaling of `u`.
    #[test]
    fn euclidean_quotient_is_scale_invariant(m in 3usize..=5, eps in 0.05f64..5.0, t in 0.1f64..10.0) {
        let model = euclidean(m);
        let unit = quotient(&model, &clamped_bubble(m, 1.0, 10.0), EnergyForm::Dirichlet).unwrap();
        let RadialTestFunction::Fiber(p) = clamped_bubble(m, eps, 10.0 * eps) else { unreachable!() };
        let scaled = RadialTestFunction::Fiber(p.scaled(t));
        let q = quotient(&model, &scaled, EnergyForm::Dirichlet).unwrap();
        prop_assert!((q.quotient / unit.quotient - 1.0).abs() < 1e-8, "{} vs {}", q.quotient, unit.quotient);
    }

    /// On `S^1 x H_c^3` every quotient lies above `c^{1/2} Q*(S^4)`.
    #[test]
    fn circle_times_hyperbolic_respects_scaling_bound(eps in 0.005f64..4.0, spread in 1.5f64..20.0) {
        let model = ModelSpace::sphere_times_hyperbolic(1, 1.0, 2, 0.5).unwrap();
        let bound = scaling_reference(4, 0.5).unwrap();
        prop_assert!((bound - 43.531).abs() < 1e-3);
        let q = quotient(&model, &clamped_bubble(4, eps, spread * eps), EnergyForm::Dirichlet).unwrap();
        prop_assert!(q.quotient >= bound, "eps={eps}: {}", q.quotient);
    }
}

#[test]
fn dirichlet_and_operator_forms_agree_on_smooth_profiles() {
    let model = ModelSpace::sphere_times_hyperbolic(2, 1.0, 1, 0.5).unwrap();
    let d = quotient(&model, &clamped_bubble(4, 0.05, 0.5), EnergyForm::Dirichlet).unwrap();
    // the operator form misses the boundary flux of the clamped profile, so compare loosely
    let o = quotient(&model, &clamped_bubble(4, 0.05, 0.5), EnergyForm::Operator).unwrap();
    assert!(
        (d.quotient / o.quotient - 1.0).abs() < 0.05,
        "{} vs {}",
        d.quotient,
        o.quotient
    );
}

#[test]
fn schoen_functions_need_the_dirichlet_form_and_a_positive_mass() {
    let model = ModelSpace::sphere_times_hyperbolic(2, 1.0, 1, 0.5).unwrap();
    let table = Arc::new(GreenModeTable::build(&model, 2, &[0.2]).unwrap());
    let config = SchoenConfig::default();
    let u = schoen_test(&model, table.clone(), &fake_mass(1e-3, 1e-8), 0.01, &config).unwrap();
    let err = quotient(&model, &RadialTestFunction::Schoen(u), EnergyForm::Operator).unwrap_err();
    assert!(matches!(err, Error::UnsupportedNonRadial(_)));

    assert!(matches!(
        schoen_test(&model, table.clone(), &fake_mass(1e-9, 1e-8), 0.01, &config),
        Err(Error::MassNotPositive { .. })
    ));
    let err = schoen_sweep(
        &model,
        &table,
        &fake_mass(1e-9, 1e-8),
        &[0.01],
        &config,
        0.0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::MassNotPositive { .. }));
}
