use std::f64::consts::PI;

use warpmass::geometry::{ModelSpace, ScalBound};
use warpmass::green::{assemble_green, geometric_grid, GreenField, GreenModeTable};
use warpmass::Error;

fn table(c: f64, truncation: usize) -> (ModelSpace, GreenModeTable) {
    let model = ModelSpace::sphere_times_hyperbolic(2, 1.0, 1, c).unwrap();
    let table = GreenModeTable::build(&model, truncation, &geometric_grid(0.1, 2.0, 5)).unwrap();
    (model, table)
}

#[test]
fn green_function_is_positive_and_decreasing() {
    let (_, table) = table(1.0, 200);
    for r in [0.3, 0.8, 2.0] {
        // the antipodal caustic is excluded by the assembly
        let pts: Vec<(f64, f64)> = (0..=8).map(|i| ((PI - 0.15) * i as f64 / 8.0, r)).collect();
        let g = assemble_green(&table, &pts).unwrap();
        assert!(g.iter().all(|v| *v > 0.0), "r={r}: {g:?}");
        assert!(
            g.windows(2).all(|w| w[1] < w[0]),
            "r={r}: not decreasing in theta"
        );
    }
    let axis: Vec<(f64, f64)> = [0.3, 0.6, 1.2, 2.4].iter().map(|r| (0.0, *r)).collect();
    let g = assemble_green(&table, &axis).unwrap();
    assert!(g.windows(2).all(|w| w[1] < w[0]));
}

/// `a_m Delta Gamma = scal Gamma` away from the pole, with `Delta` the nonnegative Laplacian
/// `-(d_s^2 + cot(s) d_s + d_r^2 + k f'/f d_r)` on zonal, fiber-radial functions.
#[test]
fn finite_difference_residual_vanishes() {
    for c in [0.5, 1.0] {
        let (model, table) = table(c, 400);
        let field = GreenField::new(&table, 0.05).unwrap();
        let scal = model.scalar_curvature(1.0, ScalBound::Inf).unwrap();
        let am = model.a_m();
        let h = 2e-3;
        for (s, r) in [(0.7, 0.4), (1.5, 0.9), (2.5, 1.6)] {
            let pts = [(s, r), (s + h, r), (s - h, r), (s, r + h), (s, r - h)];
            let v: Vec<f64> = field
                .evaluate(&pts)
                .unwrap()
                .iter()
                .map(|f| f.value)
                .collect();
            let dss = (v[1] - 2.0 * v[0] + v[2]) / (h * h);
            let drr = (v[3] - 2.0 * v[0] + v[4]) / (h * h);
            let ds = (v[1] - v[2]) / (2.0 * h);
            let dr = (v[3] - v[4]) / (2.0 * h);
            let lap = dss + ds / s.tan() + drr + model.profile.log_derivative(r) * dr;
            let residual = -am * lap + scal * v[0];
            let size = am * (dss.abs() + drr.abs()) + scal.abs() * v[0];
            assert!(
                residual.abs() < 1e-5 * size,
                "c={c} ({s},{r}): residual {residual:e} vs {size:e}"
            );
        }
    }
}

#[test]
fn insufficient_truncation_is_an_error() {
    let (_, table) = table(1.0, 8);
    assert!(matches!(
        assemble_green(&table, &[(0.0, 0.05)]),
        Err(Error::TruncationError(_))
    ));
}

#[test]
fn table_text_survives_a_file_round_trip() {
    let (_, table) = table(0.7, 120);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("modes.txt");
    std::fs::write(&path, table.to_text()).unwrap();
    let back = GreenModeTable::from_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let pts = [(0.4, 0.7), (2.0, 1.1)];
    assert_eq!(
        assemble_green(&back, &pts).unwrap(),
        assemble_green(&table, &pts).unwrap()
    );
}
