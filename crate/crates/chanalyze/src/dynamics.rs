//! Trajectory integration and asymptotic decay measurement.
//!
//! Contains a Dormand–Prince 5(4) adaptive integrator with energy-drift
//! gating for full Hamiltonian orbits, the reduced logarithmic-time flow in
//! the channel chart (with chart-exit detection), channel observables along
//! full orbits, power-law/exponential-rate fits, and a bisection refinement
//! that lands initial conditions on the stable manifold of an unstable
//! channel.

use nalgebra::DVector;
use serde::Serialize;

use crate::model::{ModelSpec, PhasePoint};
use crate::normalform::NormalForm;
use crate::reduction::{solve_mu, LocalModel};
use crate::spectral::Spectrum;
use crate::{Error, Result};

/// Tolerances and budgets for the adaptive integrator.
#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step.
    pub dt0: f64,
    /// Smallest allowed step before [`Error::StepUnderflow`].
    pub dt_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, dt0: 1e-3, dt_min: 1e-13, max_steps: 2_000_000 }
    }
}

impl OdeOptions {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }
}

/// Accepted steps of one integration.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> (&f64, &DVector<f64>) {
        (self.times.last().expect("non-empty"), self.states.last().expect("non-empty"))
    }

    /// Linear interpolation at `t` (None outside the recorded span).
    pub fn sample_linear(&self, t: f64) -> Option<DVector<f64>> {
        let times = &self.times;
        if times.is_empty() || t < times[0] || t > *times.last().unwrap() {
            return None;
        }
        let idx = times.partition_point(|&s| s < t);
        if idx == 0 {
            return Some(self.states[0].clone());
        }
        let (t0, t1) = (times[idx - 1], times[idx.min(times.len() - 1)]);
        if t1 == t0 {
            return Some(self.states[idx - 1].clone());
        }
        let a = (t - t0) / (t1 - t0);
        Some(&self.states[idx - 1] * (1.0 - a) + &self.states[idx.min(times.len() - 1)] * a)
    }
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Dormand–Prince 5(4) with PI-style step adaptation. The right-hand side
/// may fail (singular model evaluation); a failing trial step is retried
/// with a smaller `dt`.
pub fn integrate<F>(f: &F, t0: f64, t1: f64, y0: &DVector<f64>, opts: &OdeOptions) -> Result<Trajectory>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    assert!(t1 > t0, "forward integration only");
    let mut t = t0;
    let mut y = y0.clone();
    let mut dt = opts.dt0.min(t1 - t0);
    let mut traj = Trajectory { times: vec![t0], states: vec![y0.clone()] };
    let mut steps = 0usize;
    while t < t1 {
        // Remaining span too short for any admissible step: freezing the
        // state over it changes the solution by at most |f|·dt_min, far
        // below tolerance, so snap to the endpoint rather than asking the
        // error control for a forbidden step.
        if t1 - t <= opts.dt_min.max(4.0 * f64::EPSILON * t1.abs().max(1.0)) {
            traj.times.push(t1);
            traj.states.push(y.clone());
            break;
        }
        if steps >= opts.max_steps {
            return Err(Error::InvalidInput(format!(
                "step budget {} exhausted at t = {t:.6e}",
                opts.max_steps
            )));
        }
        steps += 1;
        if dt < opts.dt_min {
            return Err(Error::StepUnderflow { t });
        }
        let h = dt.min(t1 - t);
        let trial = (|| -> Result<(DVector<f64>, f64)> {
            let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
            k.push(f(t, &y)?);
            for i in 0..6 {
                let mut yi = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = DP_A[i][j];
                    if a != 0.0 {
                        yi += kj * (a * h);
                    }
                }
                k.push(f(t + DP_C[i + 1] * h, &yi)?);
            }
            let mut y5 = y.clone();
            let mut y4 = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if DP_B5[j] != 0.0 {
                    y5 += kj * (DP_B5[j] * h);
                }
                if DP_B4[j] != 0.0 {
                    y4 += kj * (DP_B4[j] * h);
                }
            }
            let mut err2 = 0.0;
            for i in 0..y.len() {
                let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                let e = (y5[i] - y4[i]) / sc;
                err2 += e * e;
            }
            Ok((y5, (err2 / y.len() as f64).sqrt()))
        })();
        match trial {
            Ok((y5, err)) => {
                if err <= 1.0 {
                    t += h;
                    y = y5;
                    traj.times.push(t);
                    traj.states.push(y.clone());
                }
                let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
                dt = h * factor.clamp(0.2, 5.0);
            }
            Err(_) if dt > opts.dt_min => {
                // Singular evaluation inside the trial step: shrink and retry.
                dt *= 0.25;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(traj)
}

/// A full-phase-space orbit with its recorded energies.
#[derive(Debug, Clone, Serialize)]
pub struct FullTrajectory {
    pub traj: Trajectory,
    pub energies: Vec<f64>,
    pub energy_drift: f64,
}

/// Integrate Hamilton's equations `ẋ = ∇_ξh, ξ̇ = −∇_xh` over `[t0, t1]`.
///
/// Errors: [`Error::EnergyBudgetExceeded`] when the drift passes
/// `1e−7·(1+|E|)·√(t1−t0)`.
pub fn integrate_full(
    model: &ModelSpec,
    p0: &PhasePoint,
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
) -> Result<FullTrajectory> {
    let e0 = model.eval_h(p0)?;
    let budget = 1e-7 * (1.0 + e0.abs()) * (t1 - t0).sqrt();
    let rhs = |_t: f64, z: &DVector<f64>| -> Result<DVector<f64>> {
        model.hamiltonian_field(&PhasePoint::from_state(z))
    };
    let traj = integrate(&rhs, t0, t1, &p0.to_state(), opts)?;
    let mut energies = Vec::with_capacity(traj.states.len());
    let mut drift: f64 = 0.0;
    for z in &traj.states {
        let e = model.eval_h(&PhasePoint::from_state(z))?;
        drift = drift.max((e - e0).abs());
        energies.push(e);
    }
    if drift > budget {
        return Err(Error::EnergyBudgetExceeded { drift, budget });
    }
    Ok(FullTrajectory { traj, energies, energy_drift: drift })
}

/// Reduced orbit in the channel chart; `exit` records `(τ, |w|)` if the
/// orbit left the chart radius.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedTrajectory {
    pub traj: Trajectory,
    pub exit: Option<(f64, f64)>,
}

/// Default chart radius for the reduced flow.
pub const CHART_RADIUS: f64 = 0.3;

/// Integrate the reduced flow `dw/dτ` (implicit-solve field, not the jet)
/// from `w0` over `[τ0, τ1]`.
///
/// With `stop_on_exit` the integration ends gracefully at the first sample
/// beyond `chart_radius`; otherwise that sample raises [`Error::ChartExit`].
pub fn integrate_reduced(
    lm: &LocalModel,
    w0: &DVector<f64>,
    tau0: f64,
    tau1: f64,
    opts: &OdeOptions,
    chart_radius: f64,
    stop_on_exit: bool,
) -> Result<ReducedTrajectory> {
    let rhs = |_tau: f64, w: &DVector<f64>| -> Result<DVector<f64>> {
        lm.reduced_field_exact(w)
    };
    // Integrate in managed segments so chart exit can stop the run early.
    let mut traj = Trajectory { times: vec![tau0], states: vec![w0.clone()] };
    let mut t = tau0;
    let mut w = w0.clone();
    let seg = ((tau1 - tau0) / 64.0).max(1e-3);
    while t < tau1 {
        let t_next = (t + seg).min(tau1);
        let piece = integrate(&rhs, t, t_next, &w, opts)?;
        for (ti, wi) in piece.times.iter().zip(piece.states.iter()).skip(1) {
            let norm = wi.norm();
            traj.times.push(*ti);
            traj.states.push(wi.clone());
            if norm > chart_radius {
                if stop_on_exit {
                    return Ok(ReducedTrajectory { traj, exit: Some((*ti, norm)) });
                }
                return Err(Error::ChartExit { at: *ti, norm });
            }
        }
        let (lt, lw) = traj.last();
        t = *lt;
        w = lw.clone();
    }
    Ok(ReducedTrajectory { traj, exit: None })
}

/// One sampled row of channel observables along a full orbit.
#[derive(Debug, Clone, Serialize)]
pub struct ObservableRow {
    pub t: f64,
    /// Logarithmic chart time `ln x_n`.
    pub tau: f64,
    /// Squared norm `|γˢ|²` of the stable eigencoordinate block.
    pub q_s: f64,
    /// Squared norm `|γᵘ|²` of the unstable eigencoordinate block.
    pub q_u: f64,
    /// `q_u − q_s`; non-decreasing after burn-in on stable-manifold orbits.
    pub q_minus: f64,
    /// `q_s + q_u = |γ|²`.
    pub q_plus: f64,
    /// `|γ|` (full eigencoordinate vector norm).
    pub gamma_abs: f64,
    /// Modulus of the adapted observable `Γ`, when a normal form is given.
    pub big_gamma_abs: f64,
    /// Clock ratio `x_n/(k t)` (tends to 1 along a channel).
    pub clock: f64,
}

/// Index of the first row with `q_plus < 1e−2` (the burn-in time after
/// which the monotonicity of `q_minus` is asserted); `None` if the orbit
/// never contracts that far.
pub fn burn_in_index(rows: &[ObservableRow]) -> Option<usize> {
    rows.iter().position(|r| r.q_plus < 1e-2)
}

/// Chart coordinates `w = (u, η)` of a full phase point, or `None` behind
/// the channel (`x·ω ≤ 0`).
pub fn chart_coords(lm: &LocalModel, p: &PhasePoint) -> Option<(f64, DVector<f64>)> {
    let n = p.dim();
    let d = n - 1;
    let xn = p.x.dot(&lm.frame.omega);
    if xn <= 0.0 {
        return None;
    }
    let mut w = DVector::zeros(2 * d);
    for i in 0..d {
        w[i] = p.x.dot(&lm.frame.tangent[i]) / xn;
        w[d + i] = (&p.xi - &lm.channel.xi).dot(&lm.frame.tangent[i]);
    }
    Some((xn, w))
}

/// Channel observables along a full orbit. `nf` supplies the adapted
/// observable column; without it `big_gamma_abs` is NaN.
pub fn observables(
    lm: &LocalModel,
    spectrum: &Spectrum,
    nf: Option<&NormalForm>,
    full: &FullTrajectory,
) -> Vec<ObservableRow> {
    let n_stable = spectrum.beta_s.len();
    let mut rows = Vec::with_capacity(full.traj.times.len());
    for (t, z) in full.traj.times.iter().zip(full.traj.states.iter()) {
        let p = PhasePoint::from_state(z);
        let Some((xn, w)) = chart_coords(lm, &p) else { continue };
        let d2 = w.len();
        let wc = DVector::from_fn(d2, |i, _| num_complex::Complex64::new(w[i], 0.0));
        let gamma = &spectrum.t_inv * wc;
        let q_s: f64 = (0..n_stable).map(|i| gamma[i].norm_sqr()).sum();
        let q_u: f64 = (n_stable..d2).map(|i| gamma[i].norm_sqr()).sum();
        let big_gamma_abs = nf.map_or(f64::NAN, |nf| nf.eval_gamma(&w).norm());
        rows.push(ObservableRow {
            t: *t,
            tau: xn.ln(),
            q_s,
            q_u,
            q_minus: q_u - q_s,
            q_plus: q_s + q_u,
            gamma_abs: (q_s + q_u).sqrt(),
            big_gamma_abs,
            clock: xn / (lm.channel.k * *t),
        });
    }
    rows
}

/// Result of a power-law or rate fit.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let dof = (xs.len().max(3) - 2) as f64;
    let stderr = (ss_res / dof / sxx).sqrt();
    (slope, stderr)
}

/// Fit `|v| ≈ C·t^p` by least squares on `ln |v|` vs `ln t`, after dropping
/// the first 10% of samples (transient) and non-positive values.
///
/// Errors: [`Error::InsufficientSamples`] below 10 usable points.
pub fn fit_exponent(samples: &[(f64, f64)]) -> Result<ExponentFit> {
    let skip = samples.len() / 10;
    let usable: Vec<(f64, f64)> = samples[skip.min(samples.len())..]
        .iter()
        .filter(|(t, v)| *t > 0.0 && *v > 0.0 && v.is_finite())
        .map(|&(t, v)| (t.ln(), v.ln()))
        .collect();
    if usable.len() < 10 {
        return Err(Error::InsufficientSamples { found: usable.len(), required: 10 });
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1).collect();
    let (slope, stderr) = linear_fit(&xs, &ys);
    Ok(ExponentFit { exponent: slope, stderr, samples: usable.len() })
}

/// Fit `|v| ≈ C·e^{ρτ}` on `(τ, v)` samples (slope of `ln |v|` vs `τ`),
/// with the same trimming rules as [`fit_exponent`].
pub fn fit_rate(samples: &[(f64, f64)]) -> Result<ExponentFit> {
    let skip = samples.len() / 10;
    let usable: Vec<(f64, f64)> = samples[skip.min(samples.len())..]
        .iter()
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if usable.len() < 10 {
        return Err(Error::InsufficientSamples { found: usable.len(), required: 10 });
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1).collect();
    let (slope, stderr) = linear_fit(&xs, &ys);
    Ok(ExponentFit { exponent: slope, stderr, samples: usable.len() })
}

/// A refined point on the stable manifold.
#[derive(Debug, Clone)]
pub struct StableShot {
    /// Coefficient along the unstable direction that lands on the manifold.
    pub s: f64,
    /// The refined chart initial condition.
    pub w0: DVector<f64>,
    /// Unstable component at the integration horizon.
    pub final_unstable: f64,
    /// Reduced orbit of the refined initial condition.
    pub orbit: ReducedTrajectory,
}

/// Horizon used by the shooting functional.
pub const SHOOT_HORIZON: f64 = 8.0;

/// Find `s` such that `w(s) = amplitude·v̂_s + s·v̂_u` lies on the stable
/// manifold: expand a sign bracket in `s`, then bisect on the unstable
/// eigencomponent at `τ =` [`SHOOT_HORIZON`] (or at chart exit). Succeeds
/// when the final unstable component drops below `1e−4·amplitude`.
pub fn shoot_stable(
    lm: &LocalModel,
    spectrum: &Spectrum,
    amplitude: f64,
    opts: &OdeOptions,
) -> Result<StableShot> {
    let t_cols = &spectrum.t;
    let t_inv = &spectrum.t_inv;
    let n_stable = spectrum.beta_s.len();
    let d2 = lm.jet.vars;
    if n_stable == 0 || n_stable >= d2 {
        return Err(Error::RefinementFailed(format!(
            "need both stable and unstable directions (stable count {n_stable} of {d2})"
        )));
    }
    let real_dir = |col: usize| -> Result<DVector<f64>> {
        let v = DVector::from_fn(d2, |i, _| t_cols[(i, col)].re);
        let n = v.norm();
        if n < 1e-10 {
            return Err(Error::RefinementFailed(format!(
                "eigenvector {col} has no real part; complex rates are not supported by the shooter"
            )));
        }
        Ok(v / n)
    };
    let v_s = real_dir(0)?;
    let v_u = real_dir(n_stable)?;
    // Real-calibrated unstable functional.
    let row = t_inv.row(n_stable);
    let c_u = (0..d2)
        .map(|i| row[i])
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("non-empty row");
    let f_u = |w: &DVector<f64>| -> f64 {
        let wc = DVector::from_fn(d2, |i, _| num_complex::Complex64::new(w[i], 0.0));
        ((t_inv * wc)[n_stable] / c_u).re
    };
    let escape = |s: f64| -> Result<(f64, ReducedTrajectory)> {
        let w0 = &v_s * amplitude + &v_u * s;
        let rt = integrate_reduced(lm, &w0, 0.0, SHOOT_HORIZON, opts, CHART_RADIUS, true)?;
        let (_, wf) = rt.traj.last();
        Ok((f_u(wf), rt))
    };
    let tol = 1e-4 * amplitude;
    let (v0, rt0) = escape(0.0)?;
    if v0.abs() < tol {
        let w0 = &v_s * amplitude;
        return Ok(StableShot { s: 0.0, w0, final_unstable: v0, orbit: rt0 });
    }
    // Expand a bracket against the sign of the unrefined shot.
    let mut v_in = v0;
    let mut bracket: Option<(f64, f64)> = None;
    let mut step = amplitude * amplitude;
    for _ in 0..60 {
        for sign in [-1.0, 1.0] {
            let s_try = sign * step;
            let (v_try, _) = escape(s_try)?;
            if v_try.signum() != v_in.signum() {
                bracket = Some((0.0, s_try));
                break;
            }
        }
        if bracket.is_some() || step > CHART_RADIUS {
            break;
        }
        step *= 2.0;
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::RefinementFailed(format!(
            "no sign change of the unstable component within |s| ≤ {step:.3e}"
        ))
    })?;
    let mut best: Option<(f64, f64, ReducedTrajectory)> = None;
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break; // f64 resolution exhausted
        }
        let (vm, rtm) = escape(mid)?;
        if best.as_ref().map_or(true, |(_, bv, _)| vm.abs() < bv.abs()) {
            best = Some((mid, vm, rtm));
        }
        if vm.abs() < tol {
            break;
        }
        if vm.signum() == v_in.signum() {
            lo = mid;
            v_in = vm;
        } else {
            hi = mid;
        }
    }
    let (s, value, orbit) = best.ok_or_else(|| {
        Error::RefinementFailed("bisection produced no iterate".into())
    })?;
    if value.abs() >= tol {
        return Err(Error::RefinementFailed(format!(
            "unstable component stalled at {value:.3e} (threshold {tol:.3e})"
        )));
    }
    let w0 = &v_s * amplitude + &v_u * s;
    Ok(StableShot { s, w0, final_unstable: value, orbit })
}

/// Lift a chart point to a full phase point at clock time `t0`
/// (`x_n = k·t0`, `μ` from the exact energy constraint).
pub fn lift_to_full(lm: &LocalModel, w: &DVector<f64>, t0: f64) -> Result<PhasePoint> {
    let n = lm.channel.omega.len();
    let d = n - 1;
    let mu = solve_mu(&lm.model, &lm.channel, &lm.frame, w)?;
    let xn = lm.channel.k * t0;
    let mut dir = lm.frame.omega.clone();
    let mut xi = &lm.channel.xi + &lm.frame.omega * mu;
    for i in 0..d {
        dir += &lm.frame.tangent[i] * w[i];
        xi += &lm.frame.tangent[i] * w[d + i];
    }
    Ok(PhasePoint::new(dir * xn, xi))
}

/// Late-time clock calibration along a full orbit.
#[derive(Debug, Clone, Serialize)]
pub struct ClockReport {
    /// Max of `|x_n/(k t) − 1|` over the final decade of the time window
    /// (`t ≥ t_end/10`).
    pub max_deviation_late: f64,
    pub samples: usize,
}

pub fn clock_check(lm: &LocalModel, full: &FullTrajectory) -> ClockReport {
    let t_end = full.traj.times.last().copied().unwrap_or(0.0);
    let cutoff = t_end / 10.0;
    let mut max_dev: f64 = 0.0;
    let mut counted = 0;
    for (t, z) in full.traj.times.iter().zip(full.traj.states.iter()) {
        if *t < cutoff {
            continue;
        }
        let p = PhasePoint::from_state(z);
        let xn = p.x.dot(&lm.frame.omega);
        max_dev = max_dev.max((xn / (lm.channel.k * *t) - 1.0).abs());
        counted += 1;
    }
    ClockReport { max_deviation_late: max_dev, samples: counted }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_linear_decay_exactly_enough() {
        // ẏ = −y from 1: y(2) = e⁻²
        let rhs = |_t: f64, y: &DVector<f64>| -> Result<DVector<f64>> { Ok(-y.clone()) };
        let traj =
            integrate(&rhs, 0.0, 2.0, &DVector::from_vec(vec![1.0]), &OdeOptions::default())
                .unwrap();
        let (_, yf) = traj.last();
        assert!((yf[0] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn fits_synthetic_power_law() {
        let samples: Vec<(f64, f64)> =
            (1..200).map(|i| (i as f64, 7.0 * (i as f64).powf(-2.0))).collect();
        let fit = fit_exponent(&samples).unwrap();
        assert!((fit.exponent + 2.0).abs() < 1e-10);
    }
}
