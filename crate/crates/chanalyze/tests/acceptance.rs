//! Acceptance gate: the eight headline checks of the toolkit, one per
//! criterion, run inside a single test so the verdicts print as one block
//! (`cargo test -p chanalyze --test acceptance -- --nocapture`).
//!
//! Every criterion prints `criterion N: PASS/FAIL — detail` and the test
//! fails at the end if any criterion failed. Failures are reported with the
//! measured numbers so a red gate is diagnosable from the log alone.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use chanalyze::dynamics::{
    burn_in_index, clock_check, fit_exponent, integrate_full, lift_to_full, observables,
    shoot_stable, ObservableRow, OdeOptions,
};
use chanalyze::geometry::{
    homogenize_two_param, lie_derivative_alpha, spiral_analysis, ScalingField,
};
use chanalyze::model::{ModelSpec, TrigPoly};
use chanalyze::normalform::{
    homological_matrix, log_log_slope, solve_order, NormalForm, RESONANCE_SIGMA_TOL,
};
use chanalyze::reduction::{ChannelGuess, LocalModel};
use chanalyze::spectral::{
    bounded_eigenvalues, check_pairing, compute_m0, decompose, detect_resonances,
    HYPERBOLICITY_TOL,
};
use chanalyze::Error;

fn metric_local_model(a: f64, energy: f64, order: usize) -> LocalModel {
    let m = ModelSpec::metric_example11(a).unwrap();
    let omega = DVector::from_vec(vec![1.0, 0.0]);
    let guess = ChannelGuess::from_direction(&m, energy, omega);
    LocalModel::build(&m, energy, &guess, order).unwrap()
}

/// Collects verdicts; `run` times a criterion against its budget and folds
/// the timing into the pass/fail decision.
struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn run(
        &mut self,
        idx: usize,
        limit: Duration,
        body: impl FnOnce() -> (bool, String),
    ) {
        let start = Instant::now();
        let (ok, detail) = body();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let verdict = ok && in_time;
        let line = format!(
            "criterion {idx}: {} — {detail} [{:.2}s of {:.0}s budget]",
            if verdict { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs_f64(),
        );
        println!("{line}");
        if !verdict {
            self.failures.push(line);
        }
    }
}

#[test]
fn acceptance() {
    let mut gate = Gate { failures: Vec::new() };
    gate.run(1, Duration::from_secs(1), criterion_1);
    gate.run(2, Duration::from_secs(5), criterion_2);
    gate.run(3, Duration::from_secs(1), criterion_3);
    gate.run(4, Duration::from_secs(30), criterion_4);
    gate.run(5, Duration::from_secs(10), criterion_5);
    gate.run(6, Duration::from_secs(60), criterion_6);
    gate.run(7, Duration::from_secs(10), criterion_7);
    gate.run(8, Duration::from_secs(1), criterion_8);
    assert!(
        gate.failures.is_empty(),
        "{} acceptance criterion(s) failed:\n{}",
        gate.failures.len(),
        gate.failures.join("\n")
    );
}

/// Anisotropic-metric channels: eigenvalues solve λ² + λ − a = 0, pair under
/// λ ↦ −1 − λ, and the fixed points are saddles.
fn criterion_1() -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    for a in [0.5, 1.0, 2.0, 3.0] {
        let lm = metric_local_model(a, 0.5, 2);
        let spectrum = decompose(&lm.b, HYPERBOLICITY_TOL).unwrap();
        let eigs = spectrum.all();
        let poly_residual = eigs
            .iter()
            .map(|l| (l * l + l - Complex64::new(a, 0.0)).norm())
            .fold(0.0f64, f64::max);
        let pairing = check_pairing(&eigs, 1e-8);
        let saddle = spectrum.beta_s.len() == 1 && spectrum.beta_u.len() == 1;
        if poly_residual > 1e-8 || !pairing.pass || !saddle {
            ok = false;
            notes.push(format!(
                "a={a}: |λ²+λ−a|={poly_residual:.2e}, pairing mismatch {:.2e}, saddle={saddle}",
                pairing.max_mismatch
            ));
        }
    }
    if ok {
        notes.push("a ∈ {0.5,1,2,3}: λ²+λ−a = 0 within 1e−8, paired, all saddles".into());
    }
    (ok, notes.join("; "))
}

/// Resonance orders across the metric family: order 5 at a = 0.75, order 4
/// at a = 2, nothing at a = √2, all at tolerance 1e−9 up to order 12.
fn criterion_2() -> (bool, String) {
    let budget = 50_000_000;
    let mut ok = true;
    let mut notes = Vec::new();
    let cases: [(f64, Option<u32>); 3] =
        [(0.75, Some(5)), (2.0, Some(4)), (2.0f64.sqrt(), None)];
    for (a, expect) in cases {
        let lm = metric_local_model(a, 0.5, 2);
        let spectrum = decompose(&lm.b, HYPERBOLICITY_TOL).unwrap();
        let hits = detect_resonances(&spectrum.all(), 12, 1e-9, budget).unwrap();
        let min_order = hits.first().map(|h| h.order());
        if min_order != expect {
            ok = false;
        }
        notes.push(format!(
            "a={a:.4}: min order {}",
            min_order.map_or("none".to_string(), |o| o.to_string())
        ));
    }
    (ok, notes.join(", "))
}

/// Sphere-potential (Morse) channels: closed-form rates −½ ± ½√3 for a
/// top-of-potential channel with V″ = −1 and E − V = 1, and the reduced
/// Hessian equals k⁻¹·diag(V″ block, identity block).
fn criterion_3() -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    let k = 2.0f64.sqrt();
    let root3 = 3.0f64.sqrt();

    // n = 2: V(θ) = cos θ at θ = 0, E = 2 (so E − V = 1, V″(0) = −1).
    {
        let m = ModelSpec::morse_trig("cos".parse().unwrap(), true);
        let guess = ChannelGuess::from_direction(&m, 2.0, DVector::from_vec(vec![1.0, 0.0]));
        let lm = LocalModel::build(&m, 2.0, &guess, 2).unwrap();
        let spectrum = decompose(&lm.b, HYPERBOLICITY_TOL).unwrap();
        let es = (spectrum.beta_s[0] - Complex64::new(-0.5 - 0.5 * root3, 0.0)).norm();
        let eu = (spectrum.beta_u[0] - Complex64::new(-0.5 + 0.5 * root3, 0.0)).norm();
        let a_mat = lm.jet.hessian0();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0 / k, 1.0 / k]));
        let a_dev = (&a_mat - &expect).abs().max();
        let k_dev = (lm.channel.k - k).abs();
        if es > 1e-8 || eu > 1e-8 || a_dev > 1e-8 || k_dev > 1e-8 {
            ok = false;
        }
        notes.push(format!(
            "n=2 trig: rate dev ({es:.1e}, {eu:.1e}), A dev {a_dev:.1e}, k dev {k_dev:.1e}"
        ));
    }

    // n = 3 critical-point form with q = (−1, −0.5): block closed forms
    // −½ ± ½√(1 − 2qᵢ) and A = k⁻¹·diag(q₁, q₂, 1, 1).
    {
        let omega = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let m = ModelSpec::morse_critical(omega.clone(), vec![-1.0, -0.5], 0.0, true).unwrap();
        let guess = ChannelGuess::from_direction(&m, 1.0, omega);
        let lm = LocalModel::build(&m, 1.0, &guess, 2).unwrap();
        let spectrum = decompose(&lm.b, HYPERBOLICITY_TOL).unwrap();
        let mut expect_eigs: Vec<f64> = vec![
            -0.5 - 0.5 * root3,
            -0.5 - 0.5 * 2.0f64.sqrt(),
            -0.5 + 0.5 * 2.0f64.sqrt(),
            -0.5 + 0.5 * root3,
        ];
        expect_eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut got: Vec<f64> = spectrum.all().iter().map(|z| z.re).collect();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let rate_dev = got
            .iter()
            .zip(&expect_eigs)
            .map(|(g, e)| (g - e).abs())
            .fold(0.0f64, f64::max);
        let im_dev = spectrum.all().iter().map(|z| z.im.abs()).fold(0.0f64, f64::max);
        let a_mat = lm.jet.hessian0();
        let expect =
            DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0 / k, -0.5 / k, 1.0 / k, 1.0 / k]));
        let a_dev = (&a_mat - &expect).abs().max();
        if rate_dev > 1e-8 || im_dev > 1e-8 || a_dev > 1e-8 {
            ok = false;
        }
        notes.push(format!("n=3 critical: rate dev {rate_dev:.1e}, A dev {a_dev:.1e}"));
    }
    (ok, notes.join("; "))
}

/// All multi-indices of length `d` summing to `m` (independent of the
/// library's monomial enumeration).
fn multi_indices(d: usize, m: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, m: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if d == 1 {
            prefix.push(m);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=m {
            prefix.push(k);
            rec(d - 1, m - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, m, &mut Vec::new(), &mut out);
    out
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|x, y| {
        x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap())
    });
}

/// Homological machinery on 50 seeded hyperbolic spectra: the degree-m
/// operator's spectrum is {⟨α, β⟩ : |α| = m}, solvable shifts solve to
/// 1e−10, and the resonance refusal fires exactly when a brute-force scan
/// of the divisors finds one below the σ threshold.
fn criterion_4() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut ok = true;
    let mut notes = Vec::new();
    let mut worst_spec_dev = 0.0f64;
    let mut worst_residual = 0.0f64;
    let mut resonant_cases = 0usize;

    for case in 0..50usize {
        let d = 1 + case % 4;
        let mut beta: Vec<Complex64> = (0..d)
            .map(|_| {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let re = sign * (0.3 + 1.7 * rng.gen::<f64>());
                let im = if rng.gen::<f64>() < 0.4 { 1.5 * rng.gen::<f64>() - 0.75 } else { 0.0 };
                Complex64::new(re, im)
            })
            .collect();
        if !beta.iter().any(|b| b.re < 0.0) {
            beta[0] = Complex64::new(-beta[0].re, beta[0].im);
        }
        // Every fifth case plants an exact order-2 resonance β₁ = 2β₂ with
        // both rates stable, so the refusal path is exercised on purpose.
        if case % 5 == 0 && d >= 2 {
            let b2 = Complex64::new(-(0.4 + rng.gen::<f64>()), 0.3 * rng.gen::<f64>());
            beta[1] = b2;
            beta[0] = 2.0 * b2;
        }
        let beta1s = *beta
            .iter()
            .filter(|b| b.re < 0.0)
            .min_by(|x, y| x.re.partial_cmp(&y.re).unwrap())
            .unwrap();
        let lambda = DMatrix::from_fn(d, d, |i, j| if i == j { beta[i] } else { Complex64::default() });

        for m in 2u32..=5 {
            let btilde = homological_matrix(&lambda, m);
            // Diagonal input ⇒ exactly diagonal operator; its spectrum is
            // the diagonal. Verified entry-wise before reading it off.
            let q = btilde.nrows();
            let mut off_diag = 0.0f64;
            for i in 0..q {
                for j in 0..q {
                    if i != j {
                        off_diag = off_diag.max(btilde[(i, j)].norm());
                    }
                }
            }
            let mut got: Vec<Complex64> = (0..q).map(|i| btilde[(i, i)]).collect();
            let mut expect: Vec<Complex64> = multi_indices(d, m)
                .iter()
                .map(|alpha| {
                    alpha
                        .iter()
                        .zip(&beta)
                        .map(|(&a, b)| f64::from(a) * b)
                        .sum::<Complex64>()
                })
                .collect();
            assert_eq!(got.len(), expect.len(), "basis size mismatch");
            sort_complex(&mut got);
            sort_complex(&mut expect);
            let dev = got
                .iter()
                .zip(&expect)
                .map(|(g, e)| (g - e).norm())
                .fold(0.0f64, f64::max);
            worst_spec_dev = worst_spec_dev.max(dev).max(off_diag);
            if dev > 1e-8 || off_diag > 0.0 {
                ok = false;
                notes.push(format!("case {case} m={m}: spectrum dev {dev:.1e}"));
            }
            // Small operators double-check the diagonal read against the
            // general eigenvalue path.
            if q <= 12 {
                let mut via_schur = bounded_eigenvalues(&btilde.map(|z| z.re)).unwrap_or_default();
                if btilde.iter().all(|z| z.im == 0.0) && via_schur.len() == q {
                    sort_complex(&mut via_schur);
                    let cross = via_schur
                        .iter()
                        .zip(&got)
                        .map(|(g, e)| (g - e).norm())
                        .fold(0.0f64, f64::max);
                    if cross > 1e-8 {
                        ok = false;
                        notes.push(format!("case {case} m={m}: eigensolver cross-check {cross:.1e}"));
                    }
                }
            }

            // Brute-force divisor oracle for the shifted solve.
            let divisors: Vec<f64> =
                expect.iter().map(|s| (s - beta1s).norm()).collect();
            let sigma_min = divisors.iter().copied().fold(f64::INFINITY, f64::min);
            let sigma_max = divisors.iter().copied().fold(0.0f64, f64::max);
            let expect_resonant = sigma_min < RESONANCE_SIGMA_TOL * sigma_max.max(1.0);
            // Skip the undecidable sliver around the threshold (random
            // spectra never land there; planted ones sit at exactly zero).
            let gray = !expect_resonant
                && sigma_min < 10.0 * RESONANCE_SIGMA_TOL * sigma_max.max(1.0);
            if gray {
                continue;
            }
            let rhs = DVector::from_fn(q, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            match solve_order(&btilde, beta1s, &rhs, m) {
                Ok(c) => {
                    if expect_resonant {
                        ok = false;
                        notes.push(format!(
                            "case {case} m={m}: solved despite divisor {sigma_min:.1e}"
                        ));
                    }
                    let mut shifted = btilde.clone();
                    for i in 0..q {
                        shifted[(i, i)] -= beta1s;
                    }
                    let residual = (&shifted * &c + &rhs).norm();
                    worst_residual = worst_residual.max(residual);
                    if residual > 1e-10 {
                        ok = false;
                        notes.push(format!("case {case} m={m}: residual {residual:.1e}"));
                    }
                }
                Err(Error::ResonanceDetected { .. }) => {
                    resonant_cases += 1;
                    if !expect_resonant {
                        ok = false;
                        notes.push(format!(
                            "case {case} m={m}: spurious refusal at divisor {sigma_min:.1e}"
                        ));
                    }
                }
                Err(other) => {
                    ok = false;
                    notes.push(format!("case {case} m={m}: unexpected error {other}"));
                }
            }
        }
    }
    if ok {
        notes.push(format!(
            "50 spectra × orders 2–5: spectrum dev ≤ {worst_spec_dev:.1e}, solve residual ≤ {worst_residual:.1e}, {resonant_cases} planted resonances refused"
        ));
    }
    (ok, notes.join("; "))
}

/// Residual decay of the order-m₀ adapted observable on the a = 1 metric
/// channel: fitted slope of |∇Γ·F − β₁ˢΓ| against the sampling radius over
/// a factor-16 shrink, required to land in [m₀+0.7, m₀+1.3].
///
/// Expected to FAIL honestly: this channel's reduced profile is even under
/// w ↦ −w, so the residual has no degree-(m₀+1) term and decays one order
/// faster (slope ≈ m₀ + 2 = 7). The one-sided bound slope ≥ m₀ + 1 — which
/// is what the underlying O(|γ|^{m+1}) statement asserts — does hold.
fn criterion_5() -> (bool, String) {
    let lm = metric_local_model(1.0, 0.5, 6);
    let spectrum = decompose(&lm.b, HYPERBOLICITY_TOL).unwrap();
    let m0 = compute_m0(&spectrum.beta_s).unwrap();
    if m0 != 5 {
        return (false, format!("expected m0 = 5, got {m0}"));
    }
    let nf = NormalForm::build(&lm, &spectrum, m0 as u32).unwrap();
    let radii: Vec<f64> = (0..5).map(|i| 0.16 / 2f64.powi(i)).collect();
    let decay = nf.residual_decay(&radii, 40, 23);
    let slope = log_log_slope(&decay);
    let lo = m0 as f64 + 0.7;
    let hi = m0 as f64 + 1.3;
    let ok = (lo..=hi).contains(&slope);
    let one_sided = slope >= m0 as f64 + 1.0 - 0.2;
    let detail = format!(
        "residual slope {slope:.3} vs band [{lo}, {hi}]; one-sided bound ≥ {} {}; \
         even reduced profile ⇒ no degree-{} residual term, decay starts at degree {}",
        m0 + 1,
        if one_sided { "holds" } else { "violated" },
        m0 + 1,
        m0 + 2,
    );
    (ok, detail)
}

/// Least-squares slope of ln q_u against ln q_s over the interior of the
/// window (10% trimmed from both ends).
fn qu_vs_qs_slope(rows: &[ObservableRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.q_s > 0.0 && r.q_u > 0.0)
        .map(|r| (r.q_s.ln(), r.q_u.ln()))
        .collect();
    if pts.len() < 10 {
        return None;
    }
    let inner = &pts[pts.len() / 10..pts.len() - pts.len() / 10];
    let n = inner.len() as f64;
    let mx = inner.iter().map(|p| p.0).sum::<f64>() / n;
    let my = inner.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = inner.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = inner.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Classical decay laws along a refined stable-manifold orbit of the a = 1
/// metric channel over t ∈ [10², 10⁴]: q⁻ non-decreasing, |γ| and |Γ|
/// exponents within 10% of β₁ˢ = (−1−√5)/2, the q_u-vs-q_s slope in
/// [1.7, 2.3], and the channel clock within 1e−3 of 1 at the endpoint.
///
/// The slope sub-check is expected to FAIL honestly: the even reduced
/// profile forces a cubic (not quadratic) stable-manifold tangency, so
/// q_u tracks q_s³ while the slaved signal lasts, and the underlying
/// q_u = O(q_s²) bound is satisfied without the band being attainable.
fn criterion_6() -> (bool, String) {
    let t0 = 1e2;
    let tmax = 1e4;
    let lm = metric_local_model(1.0, 0.5, 6);
    let spectrum = decompose(&lm.b, HYPERBOLICITY_TOL).unwrap();
    let beta1s = spectrum.beta1s().unwrap().re;
    let nf = NormalForm::build(&lm, &spectrum, 5).unwrap();
    let mut opts = OdeOptions::default();
    opts.rtol = 1e-12;
    opts.atol = 1e-14;
    let shot = shoot_stable(&lm, &spectrum, 0.02, &opts).unwrap();
    let p0 = lift_to_full(&lm, &shot.w0, t0).unwrap();
    let full = integrate_full(&lm.model, &p0, t0, tmax, &opts).unwrap();
    let rows = observables(&lm, &spectrum, Some(&nf), &full);
    let Some(burn) = burn_in_index(&rows) else {
        return (false, "orbit never contracted below the burn-in threshold".into());
    };
    let tail = &rows[burn..];

    // (a) monotone q⁻ with the tolerated 1e−8·q⁺ step decrease.
    let mut worst_drop = 0.0f64;
    for pair in tail.windows(2) {
        let drop = pair[0].q_minus - pair[1].q_minus;
        if drop > 0.0 {
            worst_drop = worst_drop.max(drop / pair[0].q_plus.max(f64::MIN_POSITIVE));
        }
    }
    let mono_ok = worst_drop <= 1e-8;

    // (b) |γ| decay exponent.
    let gamma_fit = fit_exponent(
        &tail.iter().filter(|r| r.gamma_abs > 0.0).map(|r| (r.t, r.gamma_abs)).collect::<Vec<_>>(),
    )
    .unwrap();
    let gamma_ok = (gamma_fit.exponent - beta1s).abs() <= 0.1 * beta1s.abs();

    // (c) q_u vs q_s slope.
    let slope = qu_vs_qs_slope(tail);
    let slope_ok = slope.is_some_and(|s| (1.7..=2.3).contains(&s));

    // (d) |Γ| decay exponent.
    let big_fit = fit_exponent(
        &tail
            .iter()
            .filter(|r| r.big_gamma_abs.is_finite() && r.big_gamma_abs > 0.0)
            .map(|r| (r.t, r.big_gamma_abs))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let big_ok = (big_fit.exponent - beta1s).abs() <= 0.1 * beta1s.abs();

    // (e) clock calibration at the end of the window.
    let clock = clock_check(&lm, &full);
    let last_clock_dev = (rows.last().unwrap().clock - 1.0).abs();
    let clock_ok = last_clock_dev <= 1e-3;

    let ok = mono_ok && gamma_ok && slope_ok && big_ok && clock_ok;
    let detail = format!(
        "q⁻ worst relative drop {worst_drop:.1e} ({}); |γ| exponent {:.4} vs {beta1s:.4} ({}); \
         q_u/q_s slope {} vs [1.7, 2.3] ({}; the even profile forces a cubic tangency, so q_u tracks q_s³ \
         while resolvable and sits below the integrator noise floor in this window — q_u = O(q_s²) holds, the band is unattainable); \
         |Γ| exponent {:.4} ({}); clock dev {last_clock_dev:.1e} at t=1e4, late max {:.1e} ({})",
        pf(mono_ok),
        gamma_fit.exponent,
        pf(gamma_ok),
        slope.map_or_else(|| "n/a".into(), |s| format!("{s:.3}")),
        pf(slope_ok),
        big_fit.exponent,
        pf(big_ok),
        clock.max_deviation_late,
        pf(clock_ok),
    );
    (ok, detail)
}

fn pf(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

/// Scaling geometry: α ≡ 1 for every scaling field, the two-parameter
/// homogenization of the anisotropic power metric is degree-zero with the
/// closed-form eigenvalue ratio, and the spiral survey reproduces the
/// closed-form channel at θ₀ = π/6.
fn criterion_7() -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();

    // α ≡ 1 across all field variants.
    let fields: Vec<(String, ScalingField, usize)> = vec![
        ("euler(n=2)".into(), ScalingField::Euler, 2),
        ("euler(n=3)".into(), ScalingField::Euler, 3),
        ("phase s=0.3".into(), ScalingField::PhaseScaling { s: 0.3 }, 2),
        ("phase s=0.7".into(), ScalingField::PhaseScaling { s: 0.7 }, 3),
        ("spiral c=1".into(), ScalingField::SpiralField { c: 1.0 }, 2),
        ("spiral c=2.5".into(), ScalingField::SpiralField { c: 2.5 }, 2),
    ];
    let mut worst_alpha = 0.0f64;
    for (name, field, n) in &fields {
        let report = lie_derivative_alpha(field, *n, 60, 29);
        let dev = (report.alpha - 1.0).abs().max(report.alpha_spread);
        worst_alpha = worst_alpha.max(dev);
        if dev > 1e-8 {
            ok = false;
            notes.push(format!("{name}: |α−1| = {dev:.1e}"));
        }
    }

    // Homogenized anisotropic power metric: degree zero + eigenvalue ratio.
    let riema3 = ModelSpec::riema3(2.0, -1.0).unwrap();
    let wrapped = homogenize_two_param(&riema3, -1.0, 2.0, 40, 13).unwrap();
    let degree_zero = wrapped.check_homogeneity(40, &[0.5, 1.7, 3.0], 2.0, 1e-8, 17);
    if !degree_zero.pass {
        ok = false;
        notes.push(format!("degree-zero deviation {:.1e}", degree_zero.max_deviation));
    }
    let guess = ChannelGuess::from_direction(&wrapped, 1.0, DVector::from_vec(vec![1.0, 0.0]));
    let hlm = LocalModel::build(&wrapped, 1.0, &guess, 2).unwrap();
    let hspec = decompose(&hlm.b, HYPERBOLICITY_TOL).unwrap();
    let ratio = (hspec.beta_u[0] / hspec.beta_s[0]).re;
    let disc = 17.0f64.sqrt() / 3.0;
    let expect_ratio = (1.0 - disc) / (1.0 + disc);
    let ratio_dev = (ratio - expect_ratio).abs();
    if ratio_dev > 1e-4 {
        ok = false;
        notes.push(format!("eigenvalue ratio {ratio:.7} vs {expect_ratio:.7}"));
    }

    // Spiral survey: the θ₀ = π/6 saddle with its closed-form pair.
    let f: TrigPoly = "2cos".parse().unwrap();
    let roots = spiral_analysis(&f, 1.0, 1.0).unwrap();
    let saddle = roots
        .iter()
        .find(|r| (r.theta0 - std::f64::consts::FRAC_PI_6).abs() < 1e-10);
    match saddle {
        None => {
            ok = false;
            notes.push("no channel within 1e−10 of θ0 = π/6".into());
        }
        Some(root) => {
            let rho0 = (-0.5 * 3.0f64.sqrt()).exp();
            let disc = (1.0 + 8.0 * 3.0f64.sqrt()).sqrt();
            let expect_pair = [
                Complex64::new(-0.5 * rho0 * (1.0 + disc), 0.0),
                Complex64::new(-0.5 * rho0 * (1.0 - disc), 0.0),
            ];
            let dev = root
                .eigenvalues
                .iter()
                .zip(&expect_pair)
                .map(|(g, e)| (g - e).norm())
                .fold((root.rho0 - rho0).abs(), f64::max);
            if dev > 1e-8 || root.class != "saddle" {
                ok = false;
                notes.push(format!("spiral saddle dev {dev:.1e}, class {}", root.class));
            }
        }
    }

    if ok {
        notes.push(format!(
            "α ≡ 1 within {worst_alpha:.1e}; degree-zero dev {:.1e}; ratio dev {ratio_dev:.1e}; π/6 saddle reproduced",
            degree_zero.max_deviation
        ));
    }
    (ok, notes.join("; "))
}

/// The admissible-order rule on singleton stable spectra.
fn criterion_8() -> (bool, String) {
    let cases = [(-2.0, 5usize), (-0.5, 5), (-0.1, 10)];
    let mut ok = true;
    let mut notes = Vec::new();
    for (re, expect) in cases {
        let got = compute_m0(&[Complex64::new(re, 0.0)]).unwrap();
        if got != expect {
            ok = false;
        }
        notes.push(format!("β={re} → m0 {got} (want {expect})"));
    }
    (ok, notes.join(", "))
}
