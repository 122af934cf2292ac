//! Conformal scaling geometry: the vector fields that rescale phase space,
//! their action on the symplectic form, and the transforms that turn
//! almost-homogeneous Hamiltonians into degree-zero ones.
//!
//! The symplectic form is `ω = Σ dξ_j ∧ dx_j`; in flat coordinates
//! `z = (x, ξ)` its coefficient matrix is `Ω = [[0, −I], [I, 0]]`. A scaling
//! field `v` is *conformal* with exponent `α` if `L_v ω = α·ω`; all fields
//! here have `α = 1`, so their time-`t` flows scale `ω` by `e^t`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{ModelSpec, PhasePoint, TrigPoly};
use crate::reduction::{ChannelGuess, LocalModel};
use crate::spectral;
use crate::{Error, Result};

/// Generators of the phase-space scalings used by the homogenization
/// transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingField {
    /// `v = (x, 0)`: dilation of positions only.
    Euler,
    /// `v = (s·x, (1−s)·ξ)`: anisotropic dilation of positions and momenta.
    PhaseScaling { s: f64 },
    /// `v = (x + cJx, cJξ)` on `R² × R²` with `J` the rotation generator:
    /// dilation combined with a logarithmic spiral twist.
    SpiralField { c: f64 },
}

impl ScalingField {
    /// Field value at a flat phase point `z = (x, ξ)`.
    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = z.len() / 2;
        let mut out = DVector::zeros(2 * n);
        match self {
            ScalingField::Euler => {
                for i in 0..n {
                    out[i] = z[i];
                }
            }
            ScalingField::PhaseScaling { s } => {
                for i in 0..n {
                    out[i] = s * z[i];
                    out[n + i] = (1.0 - s) * z[n + i];
                }
            }
            ScalingField::SpiralField { c } => {
                assert_eq!(n, 2, "spiral scaling lives on R^2");
                let (x1, x2, p1, p2) = (z[0], z[1], z[2], z[3]);
                out[0] = x1 - c * x2;
                out[1] = x2 + c * x1;
                out[2] = -c * p2;
                out[3] = c * p1;
            }
        }
        out
    }

    /// Constant derivative matrix of the (linear) field.
    pub fn d_matrix(&self, n: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(2 * n, 2 * n);
        match self {
            ScalingField::Euler => {
                for i in 0..n {
                    d[(i, i)] = 1.0;
                }
            }
            ScalingField::PhaseScaling { s } => {
                for i in 0..n {
                    d[(i, i)] = *s;
                    d[(n + i, n + i)] = 1.0 - s;
                }
            }
            ScalingField::SpiralField { c } => {
                assert_eq!(n, 2, "spiral scaling lives on R^2");
                d[(0, 0)] = 1.0;
                d[(0, 1)] = -c;
                d[(1, 0)] = *c;
                d[(1, 1)] = 1.0;
                d[(2, 3)] = -c;
                d[(3, 2)] = *c;
            }
        }
        d
    }

    /// Jacobian of the time-`t` flow map (the flows are linear).
    pub fn flow_jacobian(&self, n: usize, t: f64) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(2 * n, 2 * n);
        match self {
            ScalingField::Euler => {
                for i in 0..n {
                    d[(i, i)] = t.exp();
                    d[(n + i, n + i)] = 1.0;
                }
            }
            ScalingField::PhaseScaling { s } => {
                for i in 0..n {
                    d[(i, i)] = (s * t).exp();
                    d[(n + i, n + i)] = ((1.0 - s) * t).exp();
                }
            }
            ScalingField::SpiralField { c } => {
                assert_eq!(n, 2, "spiral scaling lives on R^2");
                let (co, si) = ((c * t).cos(), (c * t).sin());
                let et = t.exp();
                // x-block: e^t R(ct); ξ-block: R(ct).
                d[(0, 0)] = et * co;
                d[(0, 1)] = -et * si;
                d[(1, 0)] = et * si;
                d[(1, 1)] = et * co;
                d[(2, 2)] = co;
                d[(2, 3)] = -si;
                d[(3, 2)] = si;
                d[(3, 3)] = co;
            }
        }
        d
    }
}

/// Coefficient matrix of `ω = Σ dξ_j ∧ dx_j` in `z = (x, ξ)` coordinates.
pub fn omega_matrix(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        o[(i, n + i)] = -1.0;
        o[(n + i, i)] = 1.0;
    }
    o
}

/// Result of the conformal-exponent measurement.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaReport {
    /// Fitted exponent `α` in `L_v ω = α ω` (mean over samples).
    pub alpha: f64,
    /// Largest per-sample deviation of the fitted α from the mean.
    pub alpha_spread: f64,
    /// Largest Frobenius residual `‖dθ − αΩ‖` over samples.
    pub max_form_residual: f64,
    pub samples: usize,
}

/// Measure `α` with `L_v ω = d(i_v ω) = α ω` by a finite-difference
/// exterior derivative of `θ = i_v ω` at seeded sample points, fitting
/// `α = ⟨dθ, Ω⟩_F / ⟨Ω, Ω⟩_F`.
pub fn lie_derivative_alpha(
    field: &ScalingField,
    n: usize,
    samples: usize,
    seed: u64,
) -> AlphaReport {
    let omega = omega_matrix(n);
    let omega_norm2: f64 = omega.iter().map(|v| v * v).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // θ components: dx_j coefficient is v_ξ_j, dξ_j coefficient is −v_x_j.
    let theta = |z: &DVector<f64>| -> DVector<f64> {
        let v = field.eval(z);
        let mut th = DVector::zeros(2 * n);
        for i in 0..n {
            th[i] = v[n + i];
            th[n + i] = -v[i];
        }
        th
    };
    let mut alphas = Vec::with_capacity(samples);
    let mut max_res: f64 = 0.0;
    for _ in 0..samples {
        let z = DVector::from_fn(2 * n, |i, _| {
            let r = rng.gen::<f64>() * 2.0 - 1.0;
            if i < n {
                r + 2.0 * r.signum().max(0.0) + 0.5 // keep positions away from 0
            } else {
                r
            }
        });
        // 4th-order central differences of θ.
        let mut dtheta = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..2 * n {
            let h = 1e-4 * (1.0 + z[i].abs());
            let mut zp = z.clone();
            let mut zm = z.clone();
            let mut zp2 = z.clone();
            let mut zm2 = z.clone();
            zp[i] += h;
            zm[i] -= h;
            zp2[i] += 2.0 * h;
            zm2[i] -= 2.0 * h;
            let col =
                (theta(&zm2) - theta(&zp2) + (theta(&zp) - theta(&zm)) * 8.0) / (12.0 * h);
            // col[j] = ∂_i θ_j
            for j in 0..2 * n {
                dtheta[(i, j)] = col[j];
            }
        }
        // (dθ)_{ij} = ∂_i θ_j − ∂_j θ_i
        let m = &dtheta - dtheta.transpose();
        let alpha = m.iter().zip(omega.iter()).map(|(a, b)| a * b).sum::<f64>() / omega_norm2;
        let res = (&m - &omega * alpha).norm();
        max_res = max_res.max(res);
        alphas.push(alpha);
    }
    let mean = alphas.iter().sum::<f64>() / alphas.len().max(1) as f64;
    let spread = alphas.iter().map(|a| (a - mean).abs()).fold(0.0, f64::max);
    AlphaReport { alpha: mean, alpha_spread: spread, max_form_residual: max_res, samples }
}

/// Result of the commutator identity check `[v, X_h] = −X_h`.
#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    /// Largest `‖[v, X_h] + X_h‖ / (1 + ‖X_h‖)` over samples.
    pub max_commutator_residual: f64,
    /// Largest `|v(h)| / (1 + |h|)` over samples (invariance of `h`).
    pub max_vh: f64,
    pub samples: usize,
}

/// Verify that `h` is invariant under the scaling (`v(h) = 0`) and that the
/// Hamiltonian field satisfies `[v, X_h] = −X_h`, the infinitesimal form of
/// "the flow of `v` maps orbits to time-rescaled orbits".
///
/// Errors: [`Error::HomogeneityPreconditionFailed`] when `v(h)` is not zero
/// at some sample (the identity is then not expected to hold).
pub fn commutator_check(
    model: &ModelSpec,
    field: &ScalingField,
    samples: usize,
    seed: u64,
) -> Result<CommutatorReport> {
    let n = model.dim();
    let dv = field.d_matrix(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_res: f64 = 0.0;
    let mut max_vh: f64 = 0.0;
    let mut used = 0;
    let mut attempts = 0;
    while used < samples && attempts < 50 * samples.max(1) {
        attempts += 1;
        let x = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let xi = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        if x.norm() < 0.7 {
            continue;
        }
        let p = PhasePoint::new(x.clone(), xi.clone());
        let z = p.to_state();
        let (h, grads) = match (model.eval_h(&p), model.grad(&p)) {
            (Ok(h), Ok(g)) => (h, g),
            _ => continue,
        };
        let (gx, gxi) = grads;
        let v = field.eval(&z);
        // v(h) = ⟨∇_x h, v_x⟩ + ⟨∇_ξ h, v_ξ⟩
        let mut vh = 0.0;
        for i in 0..n {
            vh += gx[i] * v[i] + gxi[i] * v[n + i];
        }
        let rel_vh = vh.abs() / (1.0 + h.abs());
        if rel_vh > 1e-7 {
            return Err(Error::HomogeneityPreconditionFailed(format!(
                "v(h) = {vh:.3e} at |x| = {:.3}: h is not invariant under this scaling",
                x.norm()
            )));
        }
        max_vh = max_vh.max(rel_vh);
        let xh = match model.hamiltonian_field(&p) {
            Ok(f) => f,
            Err(_) => continue,
        };
        // FD Jacobian of X_h (4th order), then [v, X_h] = DX_h·v − Dv·X_h.
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        let mut ok = true;
        for j in 0..2 * n {
            let h0 = 1e-5 * (1.0 + z[j].abs());
            let eval = |t: f64| -> Result<DVector<f64>> {
                let mut zt = z.clone();
                zt[j] += t;
                model.hamiltonian_field(&PhasePoint::from_state(&zt))
            };
            let col = (|| -> Result<DVector<f64>> {
                Ok((eval(-2.0 * h0)? - eval(2.0 * h0)? + (eval(h0)? - eval(-h0)?) * 8.0)
                    / (12.0 * h0))
            })();
            match col {
                Ok(c) => jac.set_column(j, &c),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let bracket = &jac * &v - &dv * &xh;
        let res = (&bracket + &xh).norm() / (1.0 + xh.norm());
        max_res = max_res.max(res);
        used += 1;
    }
    Ok(CommutatorReport { max_commutator_residual: max_res, max_vh, samples: used })
}

/// Factor by which the time-`t` flow of the field scales `ω`, measured from
/// the exact flow Jacobian (`Dφᵀ Ω Dφ = factor·Ω`). For all fields here the
/// factor is `e^t`.
pub fn conformal_flow_factor(field: &ScalingField, n: usize, t: f64) -> f64 {
    let omega = omega_matrix(n);
    let d = field.flow_jacobian(n, t);
    let m = d.transpose() * &omega * &d;
    let num: f64 = m.iter().zip(omega.iter()).map(|(a, b)| a * b).sum();
    let den: f64 = omega.iter().map(|v| v * v).sum();
    num / den
}

fn check_scaling_invariance(
    model: &ModelSpec,
    scale_x: f64,
    scale_xi: f64,
    expected_factor: f64,
    samples: usize,
    seed: u64,
) -> Result<()> {
    let n = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = 0;
    let mut attempts = 0;
    while used < samples && attempts < 50 * samples.max(1) {
        attempts += 1;
        let x = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 + 0.5);
        let xi = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let p = PhasePoint::new(x.clone(), xi.clone());
        let q = PhasePoint::new(&x * scale_x, &xi * scale_xi);
        let (h0, h1) = match (model.eval_h(&p), model.eval_h(&q)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        used += 1;
        let expected = expected_factor * h0;
        if (h1 - expected).abs() > 1e-8 * (1.0 + expected.abs()) {
            return Err(Error::HomogeneityPreconditionFailed(format!(
                "scaling (x·{scale_x}, ξ·{scale_xi}) maps h = {h0:.6e} to {h1:.6e}, expected {expected:.6e}"
            )));
        }
    }
    Ok(())
}

/// Wrap a two-parameter homogeneous Hamiltonian
/// (`h(λx, ξ) = λ^κ₁ h`, `h(x, λξ) = λ^κ₂ h`) into its degree-zero
/// conjugate with `s = κ₂/(κ₂ − κ₁)`. The claimed degrees are verified on
/// seeded samples first.
///
/// Errors: [`Error::HomogeneityPreconditionFailed`] on degree mismatch,
/// [`Error::InvalidInput`] for `κ₁ = κ₂`.
pub fn homogenize_two_param(
    model: &ModelSpec,
    kappa1: f64,
    kappa2: f64,
    samples: usize,
    seed: u64,
) -> Result<ModelSpec> {
    if (kappa2 - kappa1).abs() < 1e-12 {
        return Err(Error::InvalidInput(
            "degenerate homogenization: kappa1 = kappa2".into(),
        ));
    }
    let lam = 1.7;
    check_scaling_invariance(model, lam, 1.0, lam.powf(kappa1), samples, seed)?;
    check_scaling_invariance(model, 1.0, lam, lam.powf(kappa2), samples, seed.wrapping_add(1))?;
    let s = kappa2 / (kappa2 - kappa1);
    Ok(ModelSpec::Homogenized { base: Box::new(model.clone()), s })
}

/// Wrap a jointly degree-zero Hamiltonian (`h(λx, λξ) = h`) into its
/// degree-zero-in-`x` conjugate (`s = 1/2`).
pub fn homogenize_joint_degree_zero(
    model: &ModelSpec,
    samples: usize,
    seed: u64,
) -> Result<ModelSpec> {
    let lam = 1.7;
    check_scaling_invariance(model, lam, lam, 1.0, samples, seed)?;
    Ok(ModelSpec::Homogenized { base: Box::new(model.clone()), s: 0.5 })
}

/// One channel angle of a spiral-invariant Hamiltonian.
#[derive(Debug, Clone, Serialize)]
pub struct SpiralRoot {
    /// Angle solving `f'(θ) = −2c/(1+c²)`.
    pub theta0: f64,
    pub f0: f64,
    /// `f''(θ0)`; its sign splits saddle channels from focus channels.
    pub f2: f64,
    /// Radial momentum scale `√(2E/(1+c²))·e^{−f0/2}` of the channel.
    pub rho0: f64,
    /// Reduced-flow eigenvalues in the radial clock:
    /// `−ρ₀/2·(1 ± √(1 − 2(1+c²)²f''₀))`, ascending by real then
    /// imaginary part. The conjugated degree-zero pipeline reproduces the
    /// same pair up to an overall positive clock factor (cross-checked at
    /// ratio level before returning).
    pub eigenvalues: [Complex64; 2],
    pub class: String,
    /// Set when `|f''(θ0)|` is too small to classify reliably.
    pub degenerate: bool,
}

/// Locate all channel angles of the spiral model `½ e^{f(θ − c ln r)} |ξ|²`
/// by scanning `f'(θ) + 2c/(1+c²)` on a 4096-point grid, polishing each
/// sign change with Newton, and running the conjugated channel pipeline at
/// each root to obtain the reduced eigenvalues.
///
/// Errors: [`Error::NoRoots`] when `f'` never reaches `−2c/(1+c²)`.
pub fn spiral_analysis(f: &TrigPoly, c: f64, energy: f64) -> Result<Vec<SpiralRoot>> {
    if f.is_constant() || c <= 0.0 {
        return Err(Error::InvalidInput("spiral analysis needs non-constant f and c > 0".into()));
    }
    let target = -2.0 * c / (1.0 + c * c);
    let phi = |theta: f64| f.d1(theta) - target;
    const GRID: usize = 4096;
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..GRID {
        let a = 2.0 * std::f64::consts::PI * i as f64 / GRID as f64;
        let b = 2.0 * std::f64::consts::PI * (i + 1) as f64 / GRID as f64;
        let (pa, pb) = (phi(a), phi(b));
        if pa == 0.0 {
            roots.push(a);
            continue;
        }
        if pa.signum() == pb.signum() {
            continue;
        }
        // Newton from the midpoint, bisection fallback.
        let (mut lo, mut hi) = (a, b);
        let mut t = 0.5 * (a + b);
        for _ in 0..60 {
            let pt = phi(t);
            if pt.abs() < 1e-14 {
                break;
            }
            if pt.signum() == pa.signum() {
                lo = t;
            } else {
                hi = t;
            }
            let dp = f.d2(t);
            let newton = t - pt / dp;
            t = if dp.abs() > 1e-12 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        roots.push(t);
    }
    // Deduplicate near-identical angles (mod 2π).
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
    if roots.len() > 1 {
        let first = roots[0];
        let last = *roots.last().unwrap();
        if (first + 2.0 * std::f64::consts::PI - last).abs() < 1e-8 {
            roots.pop();
        }
    }
    if roots.is_empty() {
        return Err(Error::NoRoots(format!(
            "f'(θ) never reaches {target:.6} (range of f' too small)"
        )));
    }

    let model = ModelSpec::spiral_homogenized(f.clone(), c)?;
    let mut out = Vec::with_capacity(roots.len());
    for theta0 in roots {
        let f0 = f.value(theta0);
        let f2 = f.d2(theta0);
        let rho0 = (2.0 * energy / (1.0 + c * c)).sqrt() * (-0.5 * f0).exp();

        // Closed-form eigenvalues in the radial clock.
        let disc = 1.0 - 2.0 * (1.0 + c * c).powi(2) * f2;
        let closed: [Complex64; 2] = if disc >= 0.0 {
            let d = disc.sqrt();
            [
                Complex64::new(-0.5 * rho0 * (1.0 + d), 0.0),
                Complex64::new(-0.5 * rho0 * (1.0 - d), 0.0),
            ]
        } else {
            let d = (-disc).sqrt();
            [
                Complex64::new(-0.5 * rho0, -0.5 * rho0 * d),
                Complex64::new(-0.5 * rho0, 0.5 * rho0 * d),
            ]
        };

        // Independent check: the conjugated degree-zero pipeline runs in a
        // conformally rescaled time, so its eigenvalue pair must match the
        // closed form up to one overall positive factor — compare the
        // small/large ratios, which the clock factor cancels.
        let guess = ChannelGuess::spiral_homogenized(f, c, energy, theta0);
        let lm = LocalModel::build(&model, energy, &guess, 2)?;
        let pairs = spectral::eigenpairs(&lm.b)?;
        let mut pipeline: Vec<Complex64> = pairs.iter().map(|(l, _)| *l).collect();
        pipeline.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let degenerate = f2.abs() < 1e-8;
        if !degenerate && pipeline[1].norm() > 1e-12 {
            let mut by_norm = closed;
            by_norm.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
            let r_pipeline = pipeline[0] / pipeline[1];
            let r_closed = by_norm[0] / by_norm[1];
            // A conjugate pair has equal moduli, so the sort order (hence
            // the ratio's imaginary sign) is arbitrary; compare against
            // both orientations.
            let dev = (r_pipeline - r_closed)
                .norm()
                .min((r_pipeline - r_closed.conj()).norm());
            if dev > 1e-3 * (1.0 + r_closed.norm()) {
                return Err(Error::RefinementFailed(format!(
                    "spiral channel at theta0 = {theta0:.6}: pipeline eigenvalue ratio \
                     {r_pipeline} deviates from the closed form {r_closed} by {dev:.3e}"
                )));
            }
        }

        let class = classify(&closed);
        out.push(SpiralRoot {
            theta0,
            f0,
            f2,
            rho0,
            eigenvalues: closed,
            class,
            degenerate,
        });
    }
    Ok(out)
}

fn classify(eigs: &[Complex64]) -> String {
    if eigs.iter().any(|l| l.re.abs() < 1e-9) {
        return "marginal".into();
    }
    let complex = eigs.iter().any(|l| l.im.abs() > 1e-9);
    let pos = eigs.iter().filter(|l| l.re > 0.0).count();
    let neg = eigs.len() - pos;
    if complex {
        if pos == 0 {
            "stable-focus".into()
        } else if neg == 0 {
            "unstable-focus".into()
        } else {
            "complex-saddle".into()
        }
    } else if pos > 0 && neg > 0 {
        "saddle".into()
    } else if pos == 0 {
        "stable-node".into()
    } else {
        "unstable-node".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_factor_closed_forms() {
        assert!((conformal_flow_factor(&ScalingField::Euler, 3, 1.0) - 1.0f64.exp()).abs() < 1e-12);
        assert!(
            (conformal_flow_factor(&ScalingField::PhaseScaling { s: 0.5 }, 2, 2.0f64.ln()) - 2.0)
                .abs()
                < 1e-12
        );
        assert!(
            (conformal_flow_factor(&ScalingField::SpiralField { c: 1.0 }, 2, 1.0) - 1.0f64.exp())
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn alpha_is_one_for_spiral() {
        let rep = lie_derivative_alpha(&ScalingField::SpiralField { c: 0.7 }, 2, 25, 7);
        assert!((rep.alpha - 1.0).abs() < 1e-8, "alpha = {}", rep.alpha);
        assert!(rep.max_form_residual < 1e-8);
    }
}
