//! Scaling geometry: conformal exponents of the dilation fields, the
//! commutator identity tying scalings to time reparameterization, the
//! degree-zero homogenization wrappers, and the spiral channel survey.

use nalgebra::DVector;
use num_complex::Complex64;

use chanalyze::geometry::{
    commutator_check, conformal_flow_factor, homogenize_joint_degree_zero,
    homogenize_two_param, lie_derivative_alpha, spiral_analysis, ScalingField,
};
use chanalyze::model::{ModelSpec, TrigPoly};
use chanalyze::reduction::{ChannelGuess, LocalModel};
use chanalyze::spectral::{decompose, HYPERBOLICITY_TOL};
use chanalyze::Error;

const PI: f64 = std::f64::consts::PI;

#[test]
fn every_scaling_field_is_conformal_with_exponent_one() {
    let cases: Vec<(ScalingField, usize)> = vec![
        (ScalingField::Euler, 2),
        (ScalingField::Euler, 3),
        (ScalingField::PhaseScaling { s: 0.5 }, 2),
        (ScalingField::PhaseScaling { s: 0.5 }, 4),
        (ScalingField::PhaseScaling { s: -0.3 }, 3),
        (ScalingField::SpiralField { c: 1.0 }, 2),
        (ScalingField::SpiralField { c: 2.5 }, 2),
    ];
    for (field, n) in cases {
        let report = lie_derivative_alpha(&field, n, 100, 99);
        assert_eq!(report.samples, 100);
        assert!(
            (report.alpha - 1.0).abs() < 1e-8,
            "{field:?} in dimension {n}: alpha = {}",
            report.alpha
        );
        assert!(report.alpha_spread < 1e-8, "{field:?}: spread {}", report.alpha_spread);
        assert!(
            report.max_form_residual < 1e-8,
            "{field:?}: residual {}",
            report.max_form_residual
        );
    }
}

#[test]
fn flow_maps_scale_the_symplectic_form_exponentially() {
    let e = std::f64::consts::E;
    assert!((conformal_flow_factor(&ScalingField::Euler, 3, 1.0) - e).abs() < 1e-12);
    assert!(
        (conformal_flow_factor(&ScalingField::PhaseScaling { s: 0.3 }, 2, 2.0f64.ln()) - 2.0)
            .abs()
            < 1e-12
    );
    assert!(
        (conformal_flow_factor(&ScalingField::SpiralField { c: 1.0 }, 2, 2.0) - e * e).abs()
            < 1e-10
    );
}

#[test]
fn flow_jacobians_integrate_their_generating_fields() {
    // d/dt φ_t(z) = v(φ_t(z)) for each linear flow, checked by a central
    // difference in t at a generic point.
    let cases: Vec<(ScalingField, usize)> = vec![
        (ScalingField::Euler, 3),
        (ScalingField::PhaseScaling { s: 0.4 }, 2),
        (ScalingField::SpiralField { c: 1.3 }, 2),
    ];
    for (field, n) in cases {
        let z = DVector::from_fn(2 * n, |i, _| 0.3 + 0.17 * i as f64);
        for t in [0.0, 0.7, 1.9] {
            let h = 1e-6;
            let zp = field.flow_jacobian(n, t + h) * &z;
            let zm = field.flow_jacobian(n, t - h) * &z;
            let rate = (zp - zm) / (2.0 * h);
            let v = field.eval(&(field.flow_jacobian(n, t) * &z));
            assert!(
                (&rate - &v).norm() < 1e-7 * (1.0 + v.norm()),
                "{field:?} at t = {t}"
            );
        }
    }
}

#[test]
fn scalings_commute_with_the_dynamics_on_matching_models() {
    // Position-degree-zero model + Euler dilation.
    let metric = ModelSpec::metric_example11(1.5).unwrap();
    let report = commutator_check(&metric, &ScalingField::Euler, 60, 5).unwrap();
    assert_eq!(report.samples, 60);
    assert!(report.max_vh < 1e-7, "v(h) = {}", report.max_vh);
    assert!(
        report.max_commutator_residual < 1e-5,
        "commutator residual {}",
        report.max_commutator_residual
    );

    // Homogenized two-parameter model + Euler dilation.
    let riema3 = ModelSpec::riema3(2.0, -1.0).unwrap();
    let wrapped = homogenize_two_param(&riema3, -1.0, 2.0, 40, 11).unwrap();
    let report = commutator_check(&wrapped, &ScalingField::Euler, 60, 6).unwrap();
    assert!(report.max_commutator_residual < 1e-5);

    // Spiral-invariant model + its twisted dilation.
    let f: TrigPoly = "2cos".parse().unwrap();
    let spiral = ModelSpec::spiral(f, 1.0).unwrap();
    let report =
        commutator_check(&spiral, &ScalingField::SpiralField { c: 1.0 }, 60, 7).unwrap();
    assert!(report.max_vh < 1e-7);
    assert!(report.max_commutator_residual < 1e-5);
}

#[test]
fn mismatched_scaling_is_rejected_before_the_commutator() {
    // The anisotropic power metric is not invariant under the plain Euler
    // dilation (it picks up λ^κ), so the precondition must fail.
    let riema3 = ModelSpec::riema3(2.0, -1.0).unwrap();
    let err = commutator_check(&riema3, &ScalingField::Euler, 40, 9).unwrap_err();
    assert!(matches!(err, Error::HomogeneityPreconditionFailed(_)), "{err}");

    // Likewise the spiral model under the untwisted dilation.
    let f: TrigPoly = "2cos".parse().unwrap();
    let spiral = ModelSpec::spiral(f, 1.0).unwrap();
    let err = commutator_check(&spiral, &ScalingField::Euler, 40, 10).unwrap_err();
    assert!(matches!(err, Error::HomogeneityPreconditionFailed(_)), "{err}");
}

#[test]
fn two_parameter_homogenization_reproduces_closed_form_rates() {
    // h = ½(x₁² + b·x₂²)^{κ/2}|ξ|² with b = 2, κ = −1: wrapping it to
    // degree zero and linearizing at the x₁-axis channel gives
    // −½ ± ½·√17/3 at every energy.
    let b = 2.0;
    let kappa = -1.0;
    let riema3 = ModelSpec::riema3(b, kappa).unwrap();
    let wrapped = homogenize_two_param(&riema3, kappa, 2.0, 40, 13).unwrap();

    let disc = (1.0 - 8.0 * kappa * (b - 1.0) / (2.0 - kappa).powi(2)).sqrt();
    assert!((disc - 17.0f64.sqrt() / 3.0).abs() < 1e-14);
    let expect_s = -0.5 - 0.5 * disc;
    let expect_u = -0.5 + 0.5 * disc;

    for energy in [0.5, 2.0] {
        let omega = DVector::from_vec(vec![1.0, 0.0]);
        let guess = ChannelGuess::from_direction(&wrapped, energy, omega);
        let lm = LocalModel::build(&wrapped, energy, &guess, 2).unwrap();
        let spec = decompose(&lm.b, HYPERBOLICITY_TOL).unwrap();
        assert_eq!(spec.beta_s.len(), 1);
        assert_eq!(spec.beta_u.len(), 1);
        assert!(
            (spec.beta_s[0].re - expect_s).abs() < 1e-7,
            "E = {energy}: stable {} vs {expect_s}",
            spec.beta_s[0]
        );
        assert!(
            (spec.beta_u[0].re - expect_u).abs() < 1e-7,
            "E = {energy}: unstable {} vs {expect_u}",
            spec.beta_u[0]
        );
        let ratio = spec.beta_u[0].re / spec.beta_s[0].re;
        let expect_ratio = (1.0 - disc) / (1.0 + disc);
        assert!((ratio - expect_ratio).abs() < 1e-7, "ratio {ratio} vs {expect_ratio}");
    }
}

#[test]
fn homogenization_guards_reject_wrong_claims() {
    let riema3 = ModelSpec::riema3(2.0, -1.0).unwrap();
    // Wrong position degree.
    let err = homogenize_two_param(&riema3, -0.5, 2.0, 40, 17).unwrap_err();
    assert!(matches!(err, Error::HomogeneityPreconditionFailed(_)), "{err}");
    // Wrong momentum degree.
    let err = homogenize_two_param(&riema3, -1.0, 1.0, 40, 18).unwrap_err();
    assert!(matches!(err, Error::HomogeneityPreconditionFailed(_)), "{err}");
    // Degenerate pair.
    let err = homogenize_two_param(&riema3, 1.0, 1.0, 40, 19).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)), "{err}");
}

#[test]
fn joint_degree_zero_wrapper_accepts_and_rejects_correctly() {
    // The inverse-square metric is invariant under (x, ξ) ↦ (λx, λξ).
    let riema2 = ModelSpec::riema2(0.3).unwrap();
    let wrapped = homogenize_joint_degree_zero(&riema2, 40, 21).unwrap();
    // The wrapped model is degree zero in x alone.
    let report = wrapped.check_homogeneity(40, &[0.5, 1.7, 3.0], 2.0, 1e-8, 22);
    assert!(report.pass, "max deviation {}", report.max_deviation);

    // A model that is degree zero in x but not jointly degree zero.
    let metric = ModelSpec::metric_example11(1.0).unwrap();
    let err = homogenize_joint_degree_zero(&metric, 40, 23).unwrap_err();
    assert!(matches!(err, Error::HomogeneityPreconditionFailed(_)), "{err}");
}

#[test]
fn spiral_survey_finds_both_channel_angles() {
    let f: TrigPoly = "2cos".parse().unwrap();
    let roots = spiral_analysis(&f, 1.0, 1.0).unwrap();
    assert_eq!(roots.len(), 2, "got {roots:?}");

    // f'(θ) = −2 sin θ = −1 at θ = π/6 and 5π/6.
    let saddle = &roots[0];
    let focus = &roots[1];
    assert!((saddle.theta0 - PI / 6.0).abs() < 1e-9);
    assert!((focus.theta0 - 5.0 * PI / 6.0).abs() < 1e-9);

    let s3 = 3.0f64.sqrt();
    assert!((saddle.f0 - s3).abs() < 1e-9);
    assert!((saddle.f2 + s3).abs() < 1e-9);
    assert!((saddle.rho0 - (-s3 / 2.0).exp()).abs() < 1e-9);
    assert!((focus.f0 + s3).abs() < 1e-9);
    assert!((focus.f2 - s3).abs() < 1e-9);
    assert!((focus.rho0 - (s3 / 2.0).exp()).abs() < 1e-9);
    assert!(!saddle.degenerate && !focus.degenerate);

    assert_eq!(saddle.class, "saddle");
    assert_eq!(focus.class, "stable-focus");

    // The eigenvalues are reported in the radial clock, where the pair sums
    // to −ρ₀ and the saddle pair is −ρ₀/2·(1 ± √(1+8√3)). (The analysis
    // itself cross-checks the degree-zero pipeline against these values at
    // ratio level, so a clock-convention slip cannot pass silently.)
    for root in &roots {
        let sum = root.eigenvalues[0] + root.eigenvalues[1];
        assert!(
            (sum - Complex64::new(-root.rho0, 0.0)).norm() < 1e-12,
            "sum {sum} vs -rho0 {}",
            -root.rho0
        );
    }
    let disc = (1.0 + 8.0 * s3).sqrt();
    let (lu, ls) = (saddle.eigenvalues[1].re, saddle.eigenvalues[0].re);
    assert!(ls < 0.0 && lu > 0.0);
    assert!((ls + 0.5 * saddle.rho0 * (1.0 + disc)).abs() < 1e-12);
    assert!((lu + 0.5 * saddle.rho0 * (1.0 - disc)).abs() < 1e-12);

    // The focus has the conjugate-pair signature at real part −ρ₀/2.
    assert!((focus.eigenvalues[0].re + 0.5 * focus.rho0).abs() < 1e-12);
    assert!(focus.eigenvalues[0].im.abs() > 0.1);
    assert!(
        (focus.eigenvalues[0].im + focus.eigenvalues[1].im).abs() < 1e-12,
        "pair {:?}",
        focus.eigenvalues
    );
}

#[test]
fn spiral_survey_reports_unreachable_targets() {
    // f' ranges over ±0.1 but the channel condition needs −1.
    let f: TrigPoly = "0.1cos".parse().unwrap();
    let err = spiral_analysis(&f, 1.0, 1.0).unwrap_err();
    assert!(matches!(err, Error::NoRoots(_)), "{err}");
}
