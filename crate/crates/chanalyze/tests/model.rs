//! Model-family oracles: hand-computed Hamiltonian values, analytic
//! gradients against finite differences, scaling invariance, and the
//! trigonometric-polynomial parser.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use chanalyze::model::{ModelSpec, PhasePoint, SmoothStep, TrigPoly};
use chanalyze::Error;

fn point(x: &[f64], xi: &[f64]) -> PhasePoint {
    PhasePoint::from_slices(x, xi)
}

#[test]
fn metric_example_value_by_hand() {
    // h = ξ1²/(2(1 + a x2²/|x|²)) + ξ2²/2 at a = 3/2, x = (3,4), ξ = (0.7,−0.3):
    // metric factor 1 + 1.5·16/25 = 1.96, so h = 0.245/1.96 + 0.045 = 0.17.
    let m = ModelSpec::metric_example11(1.5).unwrap();
    let h = m.eval_h(&point(&[3.0, 4.0], &[0.7, -0.3])).unwrap();
    assert!((h - 0.17).abs() < 1e-14, "h = {h}");
}

#[test]
fn inverse_square_metric_value_by_hand() {
    // h = |ξ|²/(2(|x|² − a ξ2²)): a = 1/2, x = (1,2), ξ = (0.3,0.4)
    // gives 0.25/(2·4.92).
    let m = ModelSpec::riema2(0.5).unwrap();
    let h = m.eval_h(&point(&[1.0, 2.0], &[0.3, 0.4])).unwrap();
    assert!((h - 0.125 / 4.92).abs() < 1e-15, "h = {h}");
    // Degenerate metric is reported, not evaluated.
    let err = m.eval_h(&point(&[0.1, 0.0], &[0.0, 1.0])).unwrap_err();
    assert!(matches!(err, Error::EvaluationAtSingularity(_)));
}

#[test]
fn anisotropic_power_metric_value_by_hand() {
    // h = (x1² + b x2²)^{κ/2} |ξ|²/2 at b = 2, κ = −1, x = (1,1), ξ = (0.2,0.1).
    let m = ModelSpec::riema3(2.0, -1.0).unwrap();
    let h = m.eval_h(&point(&[1.0, 1.0], &[0.2, 0.1])).unwrap();
    assert!((h - 0.025 / 3.0f64.sqrt()).abs() < 1e-15, "h = {h}");
}

#[test]
fn spiral_invariant_under_its_scaling_flow() {
    // h = e^{f(θ − c ln r)} |ξ|²/2 is invariant under
    // (x, ξ) ↦ (e^t R(ct) x, R(ct) ξ).
    let f: TrigPoly = "2cos".parse().unwrap();
    let m = ModelSpec::spiral(f, 1.0).unwrap();
    let p = point(&[1.2, -0.4], &[0.5, 0.9]);
    let h0 = m.eval_h(&p).unwrap();
    for t in [0.3, 1.0, -0.7] {
        let c = 1.0;
        let (co, si) = ((c * t as f64).cos(), (c * t as f64).sin());
        let rot = |v: &DVector<f64>| {
            DVector::from_vec(vec![co * v[0] - si * v[1], si * v[0] + co * v[1]])
        };
        let q = PhasePoint::new(rot(&p.x) * (t as f64).exp(), rot(&p.xi));
        let h1 = m.eval_h(&q).unwrap();
        assert!((h1 - h0).abs() < 1e-12, "t = {t}: {h1} vs {h0}");
    }
}

#[test]
fn spiral_chart_model_is_degree_zero_in_x() {
    let f: TrigPoly = "2cos".parse().unwrap();
    let m = ModelSpec::spiral_homogenized(f, 1.0).unwrap();
    let rep = m.check_homogeneity(40, &[0.5, 2.0, 7.0], 1.0, 1e-10, 11);
    assert!(rep.pass, "max deviation {}", rep.max_deviation);
}

#[test]
fn sphere_potential_values_and_regularization() {
    let v: TrigPoly = "cos".parse().unwrap();
    let bare = ModelSpec::morse_trig(v.clone(), false);
    // V(θ = π/2) = 0, V(θ = 0) = 1.
    let h1 = bare.eval_h(&point(&[0.0, 2.0], &[0.3, 0.0])).unwrap();
    assert!((h1 - 0.045).abs() < 1e-14);
    let h2 = bare.eval_h(&point(&[2.0, 0.0], &[0.0, 0.0])).unwrap();
    assert!((h2 - 1.0).abs() < 1e-14);
    assert!(bare.eval_h(&point(&[0.0, 0.0], &[0.0, 0.0])).is_err());

    let reg = ModelSpec::morse_trig(v, true);
    // Inside the cutoff the potential vanishes; outside it is untouched.
    let inside = reg.eval_h(&point(&[0.2, 0.0], &[0.0, 0.0])).unwrap();
    assert_eq!(inside, 0.0);
    let outside = reg.eval_h(&point(&[2.0, 0.0], &[0.0, 0.0])).unwrap();
    assert!((outside - 1.0).abs() < 1e-14);
    // In the transition band the value interpolates strictly.
    let mid = reg.eval_h(&point(&[0.75, 0.0], &[0.0, 0.0])).unwrap();
    assert!(mid > 0.0 && mid < 1.0, "mid = {mid}");
}

#[test]
fn critical_point_chart_potential_by_hand() {
    let omega = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let m = ModelSpec::morse_critical(omega, vec![2.0, -1.0], 0.3, false).unwrap();
    // x/xn = (0.15, 0.2, 1): V = 0.3 + 0.0225 − 0.02.
    let h = m.eval_h(&point(&[0.3, 0.4, 2.0], &[0.0, 0.0, 0.0])).unwrap();
    assert!((h - 0.3025).abs() < 1e-14, "h = {h}");
    assert!(m.eval_h(&point(&[0.3, 0.4, -2.0], &[0.0, 0.0, 0.0])).is_err());
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let f: TrigPoly = "2cos".parse().unwrap();
    let models: Vec<ModelSpec> = vec![
        ModelSpec::metric_example11(1.5).unwrap(),
        ModelSpec::riema2(0.5).unwrap(),
        ModelSpec::riema3(2.0, -1.0).unwrap(),
        ModelSpec::spiral(f.clone(), 1.0).unwrap(),
        ModelSpec::spiral_homogenized(f.clone(), 1.0).unwrap(),
        ModelSpec::morse_trig("cos-0.3sin2".parse().unwrap(), true),
        ModelSpec::morse_critical(
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
            vec![2.0, -1.0],
            0.3,
            true,
        )
        .unwrap(),
        ModelSpec::Homogenized {
            base: Box::new(ModelSpec::riema3(2.0, -1.0).unwrap()),
            s: 2.0 / 3.0,
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for m in &models {
        assert!(m.has_analytic_grad(), "{:?} should have an analytic gradient", m.describe());
        let n = m.dim();
        let mut checked = 0;
        while checked < 8 {
            let x = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 + 0.8);
            let xi = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 3.0 - 1.5);
            let p = PhasePoint::new(x, xi);
            let (Ok((gx, gxi)), Ok((fx, fxi))) = (m.grad(&p), m.grad_fd(&p)) else {
                continue;
            };
            let scale = 1.0 + gx.norm().max(gxi.norm());
            assert!(
                (&gx - &fx).norm() / scale < 1e-6,
                "∇_x mismatch {:?}: {} vs {}",
                m.describe(),
                gx,
                fx
            );
            assert!(
                (&gxi - &fxi).norm() / scale < 1e-6,
                "∇_ξ mismatch {:?}: {} vs {}",
                m.describe(),
                gxi,
                fxi
            );
            checked += 1;
        }
    }
}

#[test]
fn homogeneity_check_distinguishes_scaling_types() {
    // Degree-zero in x: passes.
    let deg0 = ModelSpec::Homogenized {
        base: Box::new(ModelSpec::riema3(2.0, -1.0).unwrap()),
        s: 2.0 / 3.0,
    };
    assert!(deg0.check_homogeneity(30, &[0.5, 2.0, 5.0], 1.0, 1e-9, 3).pass);
    // A power-law metric is x-homogeneous of degree κ ≠ 0: fails.
    let raw = ModelSpec::riema3(2.0, -1.0).unwrap();
    let rep = raw.check_homogeneity(30, &[2.0], 1.0, 1e-9, 3);
    assert!(!rep.pass, "unexpected pass with deviation {}", rep.max_deviation);
    // Jointly scaling-invariant metric becomes degree-zero at s = 1/2.
    let joint = ModelSpec::Homogenized {
        base: Box::new(ModelSpec::riema2(0.5).unwrap()),
        s: 0.5,
    };
    assert!(joint.check_homogeneity(30, &[0.5, 2.0, 5.0], 1.0, 1e-9, 3).pass);
}

#[test]
fn smooth_step_is_a_monotone_partition() {
    let s = SmoothStep::default_regularization();
    assert_eq!(s.value(0.2), 0.0);
    assert_eq!(s.value(0.5), 0.0);
    assert_eq!(s.value(1.0), 1.0);
    assert_eq!(s.value(3.0), 1.0);
    assert!((s.value(0.75) - 0.5).abs() < 1e-9, "midpoint {}", s.value(0.75));
    let mut prev = 0.0;
    for i in 0..=100 {
        let t = 0.5 + 0.5 * i as f64 / 100.0;
        let v = s.value(t);
        assert!(v >= prev - 1e-12, "non-monotone at t = {t}");
        assert!(s.deriv(t) >= -1e-12);
        prev = v;
    }
    // Derivative peaks inside the band and matches a finite difference.
    let t = 0.71;
    let fd = (s.value(t + 1e-6) - s.value(t - 1e-6)) / 2e-6;
    assert!((s.deriv(t) - fd).abs() < 1e-6, "deriv {} vs fd {fd}", s.deriv(t));
}

#[test]
fn trig_parser_accepts_signed_terms_and_rejects_garbage() {
    let p: TrigPoly = "2cos-sin3+0.25".parse().unwrap();
    for theta in [0.0f64, 0.4, 2.2, -1.3] {
        let expect = 2.0 * theta.cos() - (3.0 * theta).sin() + 0.25;
        assert!((p.value(theta) - expect).abs() < 1e-14);
    }
    let q: TrigPoly = "-cos2+3sin".parse().unwrap();
    for theta in [0.1f64, 1.7] {
        let expect = -(2.0 * theta).cos() + 3.0 * theta.sin();
        assert!((q.value(theta) - expect).abs() < 1e-14);
    }
    assert!("xyz".parse::<TrigPoly>().is_err());
    assert!("".parse::<TrigPoly>().is_err());
    assert!("cos+".parse::<TrigPoly>().is_err());
}

#[test]
fn trig_derivatives_match_finite_differences() {
    let p: TrigPoly = "1.5cos2-0.5sin+0.1".parse().unwrap();
    for theta in [0.0, 0.9, 2.0, 5.5] {
        let h = 1e-5;
        let d1_fd = (p.value(theta + h) - p.value(theta - h)) / (2.0 * h);
        let d2_fd = (p.value(theta + h) - 2.0 * p.value(theta) + p.value(theta - h)) / (h * h);
        assert!((p.d1(theta) - d1_fd).abs() < 1e-8);
        assert!((p.d2(theta) - d2_fd).abs() < 1e-5);
        assert_eq!(p.eval_deriv(theta, 0), p.value(theta));
        assert_eq!(p.eval_deriv(theta, 1), p.d1(theta));
        // The 4th derivative of a trig polynomial of harmonic ≤ 2 is
        // bounded by 16·‖coeffs‖; spot-check the cycle length.
        assert!((p.eval_deriv(theta, 4) - (p.eval_deriv(theta, 0) - 0.1) * 1.0).abs() < 24.0);
    }
}

#[test]
fn constructor_rejects_bad_parameters() {
    assert!(ModelSpec::metric_example11(0.0).is_err());
    assert!(ModelSpec::riema2(-1.0).is_err());
    // κ(b−1) must be negative (unstable-channel regime) and κ < 2.
    assert!(ModelSpec::riema3(2.0, 1.0).is_err());
    assert!(ModelSpec::riema3(2.0, 2.5).is_err());
    assert!(ModelSpec::riema3(0.0, -1.0).is_err());
    let constant = TrigPoly::constant(1.0);
    assert!(ModelSpec::spiral(constant.clone(), 1.0).is_err());
    assert!(ModelSpec::spiral("2cos".parse().unwrap(), -0.3).is_err());
    assert!(ModelSpec::morse_critical(
        DVector::from_vec(vec![1.0, 0.0]),
        vec![1.0, 1.0], // wrong length: needs n−1 = 1 entries
        0.0,
        false
    )
    .is_err());
}
