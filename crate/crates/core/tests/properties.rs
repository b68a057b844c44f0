use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use simcurve::curve::{check_admissibility_with_tol, Constraint};
use simcurve::lab::model_curve;
use simcurve::*;

fn rescaled() -> AdmissibleFunction {
    ToyReference::Rescaled.function()
}

/// Random design on `[0, 1]` with both end points included.
fn closed_grid(inner: Vec<f64>) -> DesignGrid {
    let mut pts = inner;
    pts.push(0.0);
    pts.push(1.0);
    DesignGrid::new(pts).unwrap()
}

fn well_posed_alpha() -> impl Strategy<Value = TransformParams> {
    // the rescaled toy reference is well posed for theta > -0.567
    (-0.55f64..PI / 30.0, 0.05f64..20.0).prop_map(|(t, l)| TransformParams::new(t, l))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolant_passes_through_samples(inner in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let g = closed_grid(inner);
        let c = SampledCurve::sample(&rescaled(), &g).unwrap();
        let f = linear_interpolate(&c).unwrap();
        for (&x, &y) in c.xs().iter().zip(c.values()) {
            prop_assert_eq!(f.value(x), y);
        }
    }

    #[test]
    fn interpolant_is_admissible_up_to_grid_resolution(inner in prop::collection::vec(0.0f64..1.0, 5..200)) {
        let g = closed_grid(inner);
        let h = max_spacing(&g);
        let f = linear_interpolate(&SampledCurve::sample(&rescaled(), &g).unwrap()).unwrap();
        let report = check_admissibility_with_tol(&f, PI / 3.0, 257, 1e-8).unwrap();
        for c in [Constraint::PositiveAtZero, Constraint::VanishesAtOne, Constraint::Decreasing, Constraint::SlopeAtZero] {
            prop_assert!(report.check(c).passed, "{:?}", report.check(c));
        }
        // the last chord slope is O(h) with constant max |f''| = pi^2 / 2
        prop_assert!(report.check(Constraint::FlatAtOne).measured.abs() <= PI * PI / 2.0 * h);
    }

    #[test]
    fn interpolation_error_is_bounded_by_spacing(inner in prop::collection::vec(0.0f64..1.0, 5..200)) {
        let g = closed_grid(inner);
        let f = rescaled();
        let fi = linear_interpolate(&SampledCurve::sample(&f, &g).unwrap()).unwrap();
        let sup = (0..=2000).map(|k| k as f64 / 2000.0).map(|x| (fi.value(x) - f.value(x)).abs()).fold(0.0, f64::max);
        // |f'| <= pi / 2
        prop_assert!(sup <= PI / 2.0 * max_spacing(&g) + 1e-15);
    }

    #[test]
    fn right_end_is_fixed_and_left_end_maps_to_zero(alpha in well_posed_alpha()) {
        let f = rescaled();
        let (u, v) = transform_point(alpha, 1.0, &f).unwrap();
        prop_assert!((u - 1.0).abs() <= 1e-12 && v.abs() <= 1e-12);
        prop_assert!(solve_design_preimage(alpha, 0.0, &f).unwrap().abs() <= 1e-12);
        prop_assert!((solve_design_preimage(alpha, 1.0, &f).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn transformed_abscissa_is_increasing(alpha in well_posed_alpha()) {
        let f = rescaled();
        let mut prev = -1.0;
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            let u = solve_design_preimage(alpha, x, &f).unwrap();
            prop_assert!(u > prev || (k == 0 && u >= 0.0));
            prev = u;
        }
    }

    #[test]
    fn preimage_inverts_transform(alpha in well_posed_alpha(), u in 0.0f64..1.0) {
        let f = rescaled();
        let (x, _) = match transform_point(alpha, u, &f) {
            Ok(p) => p,
            // rotated ordinate below zero: outside the transform's domain
            Err(Error::A2Violation { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let back = solve_design_preimage(alpha, x, &f).unwrap();
        prop_assert!((back - u).abs() <= 1e-12, "u = {u}, back = {back}");
    }

    #[test]
    fn pure_scalings_compose(l1 in 0.1f64..5.0, l2 in 0.1f64..5.0, x in 0.0f64..1.0) {
        let f = rescaled();
        let g = DesignGrid::uniform(101).unwrap();
        let inner = model_curve(&f, TransformParams::new(0.0, l2), &g).unwrap();
        let once = linear_interpolate(&inner).unwrap();
        let twice = transformed_value(TransformParams::new(0.0, l1), x, &once).unwrap();
        prop_assert!((twice - l1 * once.value(x)).abs() <= 1e-12 * twice.abs().max(1.0));
        let direct = transformed_value(TransformParams::new(0.0, l1 * l2), x, &f).unwrap();
        let via = l1 * transformed_value(TransformParams::new(0.0, l2), x, &f).unwrap();
        prop_assert!((direct - via).abs() <= 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn estimate_never_worsens_the_start(seed in 0u64..10_000) {
        let spec = ToySpec { n_points: 80, n_curves: 1, sigma: 0.2, seed, ..Default::default() };
        let d = generate_toy(&spec).unwrap();
        let p = RegistrationProblem::new(d.curves[0].clone(), d.reference.clone(), spec.bounds, SolverOptions::default()).unwrap();
        let r = p.estimate().unwrap();
        prop_assert!(r.contrast_value >= 0.0);
        prop_assert!(r.contrast_value <= p.contrast(TransformParams::IDENTITY).unwrap());
    }
}

#[test]
fn scaling_target_scales_lambda_only() {
    let spec = ToySpec { n_points: 150, n_curves: 3, sigma: 0.05, seed: 11, ..Default::default() };
    let d = generate_toy(&spec).unwrap();
    let c = 3.0;
    for curve in &d.curves {
        let base = RegistrationProblem::new(curve.clone(), d.reference.clone(), spec.bounds, SolverOptions::default()).unwrap();
        let scaled_curve = SampledCurve::new(curve.grid().clone(), curve.values().iter().map(|v| c * v).collect()).unwrap();
        let mut bounds = spec.bounds;
        bounds.lambda_min *= c;
        bounds.lambda_max *= c;
        let scaled = RegistrationProblem::new(scaled_curve, d.reference.clone(), bounds, SolverOptions::default()).unwrap();
        let (a, b) = (base.estimate().unwrap().alpha_hat, scaled.estimate().unwrap().alpha_hat);
        assert!((a.theta - b.theta).abs() < 1e-6, "{a:?} {b:?}");
        assert!((c * a.lambda - b.lambda).abs() < 1e-6 * b.lambda.max(1.0), "{a:?} {b:?}");
    }
}

#[test]
fn interpolated_contrast_tracks_exact_within_spacing() {
    let f = rescaled();
    let alphas: Vec<TransformParams> = [-0.5, -0.3, -0.1, 0.0, 0.1]
        .iter()
        .flat_map(|&t| [0.5, 1.0, 2.5, 5.0].map(move |l| TransformParams::new(t, l)))
        .collect();
    let mut worst_ratio: f64 = 0.0;
    for (k, n) in [50usize, 200, 800, 3200].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let mut pts: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        pts.extend([0.0, 1.0]);
        let g = DesignGrid::new(pts).unwrap();
        let truth = model_curve(&f, TransformParams::new(-0.3, 2.5), &g).unwrap();
        let y: Vec<f64> = truth.values().iter().map(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let target = SampledCurve::new(g.clone(), y).unwrap();
        let exact = RegistrationProblem::new(target.clone(), f.clone(), ParamBox::default(), SolverOptions::default()).unwrap();
        let fi = linear_interpolate(&SampledCurve::sample(&f, &g).unwrap()).unwrap();
        let interp = RegistrationProblem::new(target, fi, ParamBox::default(), SolverOptions::default()).unwrap();
        for &a in &alphas {
            let d = (exact.contrast(a).unwrap() - interp.contrast(a).unwrap()).abs();
            worst_ratio = worst_ratio.max(d / max_spacing(&g));
        }
    }
    // |M_interp - M_exact| <= |T_i - T_e| (|r_i| + |r_e|); with lambda <= 5,
    // |f'| <= pi/2 and residuals of order one this stays well below 20
    assert!(worst_ratio < 20.0, "ratio {worst_ratio}");
}

#[test]
fn noiseless_toy_curves_meet_the_shape_constraints() {
    let f = rescaled();
    let g = DesignGrid::uniform(513).unwrap();
    for theta in [-0.5, -0.3, -0.1, 0.0, 0.05, PI / 30.0] {
        let c = model_curve(&f, TransformParams::new(theta, 2.0), &g).unwrap();
        let fi = linear_interpolate(&c).unwrap();
        let r = check_admissibility_with_tol(&fi, PI / 3.0, 513, 1e-8).unwrap();
        assert!(r.check(Constraint::PositiveAtZero).passed);
        assert!(r.check(Constraint::VanishesAtOne).passed);
        // f'(0) = 0, so the deformed curve starts with the sign of sin(theta)
        // and is decreasing only for theta <= 0
        assert_eq!(r.check(Constraint::Decreasing).passed, theta <= 0.0, "theta {theta}");
    }
}

#[test]
fn seeds_give_identical_outputs() {
    let cfg = McConfig { sigma: 0.1, ..Default::default() };
    let a = run_consistency_sweep(&cfg, &[100], 20).unwrap();
    let b = run_consistency_sweep(&cfg, &[100], 20).unwrap();
    assert_eq!(a, b);
    let spec = ToySpec { seed: 99, ..Default::default() };
    assert_eq!(generate_toy(&spec).unwrap().curves, generate_toy(&spec).unwrap().curves);
}
