//! Channel fixed points, moving frames, and the reduced flow near a channel.
//!
//! A *channel point* at energy `E` is `(ω, ξ̄, k)` with `|ω| = 1`, `k > 0`,
//! solving
//!
//! ```text
//! h(ω, ξ̄) = E,    ∇_x h(ω, ξ̄) = 0,    ∇_ξ h(ω, ξ̄) = k ω.
//! ```
//!
//! Near a channel point the energy surface is charted by tangential
//! coordinates `w = (u, η) ∈ R^{2(n−1)}`: the position is
//! `x = x_n (ω + Σ u_i e_i)` and the momentum `ξ = ξ̄ + μ ω + Σ η_i e_i`,
//! where `{e_i}` is an orthonormal frame perpendicular to `ω` and `μ = −g(w)`
//! is fixed by the energy constraint `h = E` on the branch with
//! `∂h/∂μ = ω·∇_ξ h > 0`. In the logarithmic time `τ = ln x_n` the flow on
//! the energy surface reduces to
//!
//! ```text
//! du/dτ = ∇_η g − u,      dη/dτ = −∇_u g,
//! ```
//!
//! whose linearization at `w = 0` is the matrix returned by [`matrix_b`].
//! All machinery assumes `h` is homogeneous of degree zero in `x` on the
//! sampled region (check with [`crate::model::ModelSpec::check_homogeneity`]).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::fd;
use crate::model::{ModelSpec, PhasePoint, TrigPoly};
use crate::normalform::{monomials_up_to, Monomial};
use crate::{Error, Result};

/// Radius at which degree-zero models are evaluated. Chosen outside the
/// default regularization band `[0.5, 1]`, so regularized and bare sphere
/// potentials agree on the chart.
pub const EVAL_RADIUS: f64 = 2.0;

/// Convergence threshold for the channel equations (scaled by `1 + |E|`).
pub const CHANNEL_TOL: f64 = 1e-10;

/// Richardson disagreement gate for jet coefficients (relative to the
/// coefficient magnitude) at derivative orders up to 4; order 5 uses 5×,
/// order 6 uses 10×, and 7+ use 300× this base — see `jet_gate_for_order`.
pub const JET_GATE: f64 = 1e-6;

/// A solved channel fixed point.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelPoint {
    pub energy: f64,
    /// Unit outgoing direction.
    pub omega: DVector<f64>,
    /// Asymptotic momentum (not parallel to `omega` in general).
    pub xi: DVector<f64>,
    /// Transversality constant `k = ω·∇_ξ h > 0`.
    pub k: f64,
    /// Sup-norm of the channel equations at the returned point.
    pub residual: f64,
}

/// Initial data for the channel solver.
#[derive(Debug, Clone)]
pub struct ChannelGuess {
    pub omega: DVector<f64>,
    pub xi: DVector<f64>,
    pub k: f64,
}

impl ChannelGuess {
    /// Guess with `ξ = kω`, `k` found by solving `h(Rω, kω) = E` along the
    /// ray (bisection after bracketing; falls back to `k = √(2|E| + 1)`).
    pub fn from_direction(model: &ModelSpec, energy: f64, omega: DVector<f64>) -> Self {
        let omega = omega.normalize();
        let eval = |k: f64| -> Option<f64> {
            let p = PhasePoint::new(&omega * EVAL_RADIUS, &omega * k);
            model.eval_h(&p).ok().map(|h| h - energy)
        };
        let fallback = (2.0 * energy.abs() + 1.0).sqrt();
        let mut lo = 1e-6;
        let mut hi = fallback.max(1.0);
        let k = (|| {
            let flo = eval(lo)?;
            let mut fhi = eval(hi)?;
            let mut tries = 0;
            while flo.signum() == fhi.signum() && tries < 60 {
                hi *= 1.5;
                fhi = eval(hi)?;
                tries += 1;
            }
            if flo.signum() == fhi.signum() {
                return None;
            }
            let mut sign_lo = flo.signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = eval(mid)?;
                if fm.signum() == sign_lo {
                    lo = mid;
                    sign_lo = fm.signum();
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * (lo + hi))
        })()
        .unwrap_or(fallback);
        let xi = &omega * k;
        ChannelGuess { omega, xi, k }
    }

    /// Exact channel data for [`ModelSpec::SpiralHomogenized`] at an angle
    /// `θ0` solving `f'(θ0) = −2c/(1 + c²)`:
    /// `p_θ = c·p_r/(1+c²)`, `p_r = √(2E(1+c²)) e^{−f(θ0)/2}`.
    pub fn spiral_homogenized(f: &TrigPoly, c: f64, energy: f64, theta0: f64) -> Self {
        let f0 = f.value(theta0);
        let pr = (2.0 * energy * (1.0 + c * c)).sqrt() * (-0.5 * f0).exp();
        let pt = c * pr / (1.0 + c * c);
        let omega = DVector::from_vec(vec![theta0.cos(), theta0.sin()]);
        let xperp = DVector::from_vec(vec![-omega[1], omega[0]]);
        let xi = &omega * pr + &xperp * pt;
        let k = (2.0 * energy / (1.0 + c * c)).sqrt() * (0.5 * f0).exp();
        ChannelGuess { omega, xi, k }
    }
}

/// A channel branch continued over an energy grid.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelCurve {
    pub points: Vec<ChannelPoint>,
}

/// Orthonormal frame `{e_i}` spanning `ω⊥`.
#[derive(Debug, Clone, Serialize)]
pub struct Frame {
    pub omega: DVector<f64>,
    pub tangent: Vec<DVector<f64>>,
}

/// The channel equations stacked as one residual vector:
/// `[h − E, ∇_x h, ∇_ξ h − kω, ½(|ω|² − 1)]` at `x = R·ω`.
fn channel_residual(model: &ModelSpec, energy: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
    let n = model.dim();
    let omega = z.rows(0, n).clone_owned();
    let xi = z.rows(n, n).clone_owned();
    let k = z[2 * n];
    let p = PhasePoint::new(&omega * EVAL_RADIUS, xi);
    let h = model.eval_h(&p)?;
    let (gx, gxi) = model.grad(&p)?;
    let mut r = DVector::zeros(2 * n + 2);
    r[0] = h - energy;
    // ∇_x h scaled by the evaluation radius so the equations stay O(1).
    r.rows_mut(1, n).copy_from(&(&gx * EVAL_RADIUS));
    r.rows_mut(1 + n, n).copy_from(&(&gxi - &omega * k));
    r[1 + 2 * n] = 0.5 * (omega.norm_squared() - 1.0);
    Ok(r)
}

/// Damped Gauss–Newton solve of the channel equations from `guess`.
///
/// Errors: [`Error::NewtonDiverged`] after 50 iterations without meeting the
/// tolerance, [`Error::NonTransversal`] if the converged `k` is not positive.
pub fn find_channel_point(
    model: &ModelSpec,
    energy: f64,
    guess: &ChannelGuess,
) -> Result<ChannelPoint> {
    let n = model.dim();
    assert_eq!(guess.omega.len(), n, "guess dimension mismatch");
    let tol = CHANNEL_TOL * (1.0 + energy.abs());
    let mut z = DVector::zeros(2 * n + 1);
    z.rows_mut(0, n).copy_from(&guess.omega.normalize());
    z.rows_mut(n, n).copy_from(&guess.xi);
    z[2 * n] = guess.k;

    let mut r = channel_residual(model, energy, &z)
        .map_err(|e| Error::NewtonDiverged(format!("channel residual at guess failed: {e}")))?;
    for _ in 0..50 {
        if r.amax() < tol {
            break;
        }
        // Finite-difference Jacobian of the residual (the model gradient is
        // analytic for built-in families; one more derivative is numeric).
        let mut jac = DMatrix::zeros(2 * n + 2, 2 * n + 1);
        for j in 0..2 * n + 1 {
            let h = 1e-6 * (1.0 + z[j].abs());
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let rp = channel_residual(model, energy, &zp)?;
            let rm = channel_residual(model, energy, &zm)?;
            jac.set_column(j, &((rp - rm) / (2.0 * h)));
        }
        let svd = jac.svd(true, true);
        let delta = svd
            .solve(&(-&r), 1e-12)
            .map_err(|e| Error::NewtonDiverged(format!("least-squares step failed: {e}")))?;
        let base_norm = r.norm();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..9 {
            let zt = &z + &delta * t;
            if let Ok(rt) = channel_residual(model, energy, &zt) {
                if rt.norm() < (1.0 - 0.25 * t) * base_norm || rt.amax() < tol {
                    z = zt;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged(format!(
                "no descent step at residual {:.3e} (energy {energy})",
                base_norm
            )));
        }
    }
    if r.amax() >= tol {
        return Err(Error::NewtonDiverged(format!(
            "channel equations stalled at residual {:.3e} (energy {energy}, tol {tol:.1e})",
            r.amax()
        )));
    }

    let omega = z.rows(0, n).clone_owned().normalize();
    let xi = z.rows(n, n).clone_owned();
    let p = PhasePoint::new(&omega * EVAL_RADIUS, xi.clone());
    let (_, gxi) = model.grad(&p)?;
    let k = omega.dot(&gxi);
    if k <= 1e-8 {
        return Err(Error::NonTransversal { k });
    }
    let mut zf = DVector::zeros(2 * n + 1);
    zf.rows_mut(0, n).copy_from(&omega);
    zf.rows_mut(n, n).copy_from(&xi);
    zf[2 * n] = k;
    let residual = channel_residual(model, energy, &zf)?.amax();
    Ok(ChannelPoint { energy, omega, xi, k, residual })
}

/// Continue a channel branch across `energies`, warm-starting each solve
/// from the previous point.
///
/// Errors: the first energy's failure is propagated as-is; a later failure
/// becomes [`Error::BranchLost`] carrying the last good energy.
pub fn continue_channel(
    model: &ModelSpec,
    energies: &[f64],
    guess: &ChannelGuess,
) -> Result<ChannelCurve> {
    if energies.is_empty() {
        return Err(Error::InvalidInput("empty energy grid".into()));
    }
    let mut points: Vec<ChannelPoint> = Vec::with_capacity(energies.len());
    for (idx, &energy) in energies.iter().enumerate() {
        let g = match points.last() {
            None => guess.clone(),
            Some(prev) => ChannelGuess {
                omega: prev.omega.clone(),
                xi: prev.xi.clone(),
                k: prev.k,
            },
        };
        match find_channel_point(model, energy, &g) {
            Ok(cp) => points.push(cp),
            Err(e) => {
                if idx == 0 {
                    return Err(e);
                }
                return Err(Error::BranchLost { last_good: points[idx - 1].energy });
            }
        }
    }
    Ok(ChannelCurve { points })
}

/// Orthonormal completion of `omega`. With `prev` supplied the new frame is
/// aligned to it (previous tangents projected off the new `omega`, then
/// re-orthonormalized in order), which keeps frames continuous along a
/// channel curve.
pub fn build_frame(omega: &DVector<f64>, prev: Option<&Frame>) -> Frame {
    let n = omega.len();
    let omega = omega.normalize();
    let mut tangent: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    let push_orthonormalized = |v: &DVector<f64>, tangent: &mut Vec<DVector<f64>>| -> bool {
        let mut v = v - &omega * omega.dot(v);
        for w in tangent.iter() {
            let proj = w.dot(&v);
            v -= w * proj;
        }
        let norm = v.norm();
        if norm < 1e-8 {
            return false;
        }
        tangent.push(v / norm);
        true
    };
    if let Some(prev) = prev {
        for t in &prev.tangent {
            push_orthonormalized(t, &mut tangent);
        }
    } else {
        // Deterministic seed: standard basis minus the most-parallel axis.
        let skip = (0..n).max_by(|&i, &j| omega[i].abs().total_cmp(&omega[j].abs())).unwrap();
        for i in (0..n).filter(|&i| i != skip) {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            push_orthonormalized(&e, &mut tangent);
        }
    }
    // Fill any rank loss from the standard basis.
    let mut axis = 0;
    while tangent.len() < n - 1 && axis < n {
        let mut e = DVector::zeros(n);
        e[axis] = 1.0;
        push_orthonormalized(&e, &mut tangent);
        axis += 1;
    }
    Frame { omega, tangent }
}

/// Chart point `(x, ξ)` for tangential coordinates `w = (u, η)` and normal
/// momentum offset `μ`.
fn chart_point(cp: &ChannelPoint, frame: &Frame, w: &DVector<f64>, mu: f64) -> PhasePoint {
    let n = cp.omega.len();
    let d = n - 1;
    let mut dir = cp.omega.clone();
    let mut xi = &cp.xi + &cp.omega * mu;
    for i in 0..d {
        dir += &frame.tangent[i] * w[i];
        xi += &frame.tangent[i] * w[d + i];
    }
    PhasePoint::new(dir * EVAL_RADIUS, xi)
}

/// Solve `h(x(u), ξ̄ + μω + η) = E` for `μ` near 0 on the transversal
/// branch `∂h/∂μ = ω·∇_ξ h > 0`. Newton is run to its machine floor (exit
/// when the residual stops improving), not just to a fixed tolerance: the
/// jet stencils difference this solve and need every digit.
pub fn solve_mu(
    model: &ModelSpec,
    cp: &ChannelPoint,
    frame: &Frame,
    w: &DVector<f64>,
) -> Result<f64> {
    let tol = 1e-12 * (1.0 + cp.energy.abs());
    let mut mu = 0.0;
    let mut best = (f64::INFINITY, 0.0);
    let mut stalled = 0;
    for _ in 0..70 {
        let p = chart_point(cp, frame, w, mu);
        let phi = model.eval_h(&p)? - cp.energy;
        if phi.abs() < best.0 {
            best = (phi.abs(), mu);
            stalled = 0;
        } else {
            stalled += 1;
        }
        if stalled >= 2 && best.0 < tol {
            return Ok(best.1);
        }
        let (_, gxi) = model.grad(&p)?;
        let dphi = cp.omega.dot(&gxi);
        if dphi <= 1e-10 {
            if best.0 < tol {
                return Ok(best.1);
            }
            return Err(Error::ImplicitSolveFailed(format!(
                "transversality lost during Newton: ∂h/∂μ = {dphi:.3e} at |w| = {:.3}",
                w.norm()
            )));
        }
        mu -= phi / dphi;
    }
    if best.0 < 1e-9 * (1.0 + cp.energy.abs()) {
        return Ok(best.1);
    }
    Err(Error::ImplicitSolveFailed(format!(
        "Newton stalled at |h − E| = {:.3e} for |w| = {:.3}",
        best.0,
        w.norm()
    )))
}

/// `g(w) = −μ(w)`: the implicit generating function of the reduced flow.
pub fn g_exact(model: &ModelSpec, cp: &ChannelPoint, frame: &Frame, w: &DVector<f64>) -> Result<f64> {
    Ok(-solve_mu(model, cp, frame, w)?)
}

/// Exact gradient of `g`: `∂g/∂w_i = (∂h/∂w_i)/(∂h/∂μ)` at `(w, μ(w))`.
/// No finite differences — this is the implicit function theorem applied to
/// the analytic model gradient.
pub fn grad_g_exact(
    model: &ModelSpec,
    cp: &ChannelPoint,
    frame: &Frame,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = cp.omega.len();
    let d = n - 1;
    let mu = solve_mu(model, cp, frame, w)?;
    let p = chart_point(cp, frame, w, mu);
    let (gx, gxi) = model.grad(&p)?;
    let dmu = cp.omega.dot(&gxi);
    if dmu <= 1e-10 {
        return Err(Error::ImplicitSolveFailed(format!(
            "transversality lost: ∂h/∂μ = {dmu:.3e}"
        )));
    }
    let mut out = DVector::zeros(2 * d);
    for i in 0..d {
        out[i] = EVAL_RADIUS * frame.tangent[i].dot(&gx) / dmu;
        out[d + i] = frame.tangent[i].dot(&gxi) / dmu;
    }
    Ok(out)
}

/// Truncated Taylor expansion of `g` at `w = 0` in graded-lex order.
#[derive(Debug, Clone, Serialize)]
pub struct GJet {
    /// Number of chart variables `2(n−1)`.
    pub vars: usize,
    /// Total degree kept.
    pub order: usize,
    pub coeffs: BTreeMap<Monomial, f64>,
    /// Largest disagreement between coefficient estimates obtained from
    /// different first-derivative components (cross-partial consistency).
    pub max_cross_error: f64,
}

impl GJet {
    pub fn coeff(&self, alpha: &Monomial) -> f64 {
        self.coeffs.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, w: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (alpha, &c) in &self.coeffs {
            acc += c * alpha.eval_real(w);
        }
        acc
    }

    pub fn grad(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.vars);
        for (alpha, &c) in &self.coeffs {
            for i in 0..self.vars {
                let e = alpha.0[i];
                if e == 0 {
                    continue;
                }
                let mut beta = alpha.clone();
                beta.0[i] = e - 1;
                out[i] += c * e as f64 * beta.eval_real(w);
            }
        }
        out
    }

    /// Hessian of `g` at `w = 0` (from the quadratic coefficients).
    pub fn hessian0(&self) -> DMatrix<f64> {
        let d = self.vars;
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let mut exps = vec![0u32; d];
                exps[i] += 1;
                exps[j] += 1;
                let c = self.coeff(&Monomial(exps));
                if i == j {
                    a[(i, i)] = 2.0 * c;
                } else {
                    a[(i, j)] = c;
                    a[(j, i)] = c;
                }
            }
        }
        a
    }

    /// Coefficients keyed `"a1,a2,..."` for JSON reports.
    pub fn coeff_table(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut map = serde_json::Map::new();
        for (alpha, &c) in &self.coeffs {
            map.insert(alpha.key(), serde_json::json!(c));
        }
        map
    }
}

/// Step-size table for differentiating `∂g/∂w` numerically, tuned against
/// closed-form jets (flat and sphere-potential models): truncation error
/// dominates above these steps, solve noise below them.
fn step_for_order(p: usize) -> f64 {
    match p {
        0..=2 => 0.05,
        3..=5 => 0.02,
        6 => 0.028,
        _ => 0.04,
    }
}

/// Achievable relative agreement per derivative order (measured): ≤ 2e−7
/// for orders up to 4, ~2e−6 at order 5 for potentials without reflection
/// symmetry, ~3e−6 at order 6, ~1e−4 at order 7.
fn jet_gate_for_order(p: usize) -> f64 {
    match p {
        0..=4 => JET_GATE,
        5 => 5.0 * JET_GATE,
        6 => 10.0 * JET_GATE,
        _ => 300.0 * JET_GATE,
    }
}

/// Tensor-product central-difference estimate of the Taylor coefficient
/// `∂^β G / β!` of the vector function `G = ∇g` at 0, with per-axis step
/// `h`. Returns one value per component of `G`.
fn jet_stencil(
    model: &ModelSpec,
    cp: &ChannelPoint,
    frame: &Frame,
    beta: &[u32],
    h: f64,
) -> Result<DVector<f64>> {
    let vars = beta.len();
    let active: Vec<usize> = (0..vars).filter(|&i| beta[i] > 0).collect();
    if active.is_empty() {
        return grad_g_exact(model, cp, frame, &DVector::zeros(vars));
    }
    let mut axis_nodes: Vec<Vec<f64>> = Vec::new();
    let mut axis_weights: Vec<Vec<f64>> = Vec::new();
    for &i in &active {
        let (nodes, weights) = fd::central_weights(beta[i] as usize, h);
        axis_nodes.push(nodes);
        axis_weights.push(weights);
    }
    let d = vars;
    let mut acc = DVector::zeros(d);
    let mut counter = vec![0usize; active.len()];
    loop {
        let mut w = DVector::zeros(vars);
        let mut weight = 1.0;
        for (a, &i) in active.iter().enumerate() {
            w[i] = axis_nodes[a][counter[a]];
            weight *= axis_weights[a][counter[a]];
        }
        if weight != 0.0 {
            acc += grad_g_exact(model, cp, frame, &w)? * weight;
        }
        // Advance the multi-counter.
        let mut pos = 0;
        loop {
            if pos == active.len() {
                let mut fact = 1.0;
                for &b in beta {
                    for k in 2..=b {
                        fact *= k as f64;
                    }
                }
                return Ok(acc / fact);
            }
            counter[pos] += 1;
            if counter[pos] < axis_nodes[pos].len() {
                break;
            }
            counter[pos] = 0;
            pos += 1;
        }
    }
}

/// Three-level Richardson data for one multi-index: the extrapolated
/// coefficient estimates and their worst component-wise disagreement
/// relative to the coefficient magnitude.
#[doc(hidden)]
pub fn jet_probe(
    model: &ModelSpec,
    cp: &ChannelPoint,
    frame: &Frame,
    beta: &[u32],
    h: f64,
) -> Result<(DVector<f64>, f64)> {
    let d1 = jet_stencil(model, cp, frame, beta, h)?;
    let d2 = jet_stencil(model, cp, frame, beta, 0.5 * h)?;
    let d4 = jet_stencil(model, cp, frame, beta, 0.25 * h)?;
    let r1 = (&d2 * 16.0 - &d1) / 15.0;
    let r2 = (&d4 * 16.0 - &d2) / 15.0;
    let mut rel = 0.0f64;
    for i in 0..r1.len() {
        let scale = 1.0 + r1[i].abs().max(r2[i].abs());
        rel = rel.max((r1[i] - r2[i]).abs() / scale);
    }
    Ok(((r2 * 64.0 - r1) / 63.0, rel))
}

/// Richardson-extrapolated coefficient with a three-level error gate:
/// estimates at steps `h, h/2, h/4` are combined pairwise; the two
/// extrapolants must agree component-wise to [`JET_GATE`] relative to the
/// coefficient magnitude. If the tuned step is truncation-dominated (steep
/// models such as exponential spiral profiles), the probe is retried at
/// halved steps, keeping the best-agreeing estimate.
fn jet_coeff_checked(
    model: &ModelSpec,
    cp: &ChannelPoint,
    frame: &Frame,
    beta: &[u32],
) -> Result<DVector<f64>> {
    let p: u32 = beta.iter().sum();
    if p == 0 {
        return jet_stencil(model, cp, frame, beta, 1.0);
    }
    let mut h = step_for_order(p as usize);
    let gate = jet_gate_for_order(p as usize);
    let mut best: Option<(DVector<f64>, f64)> = None;
    for _ in 0..3 {
        let (value, disagreement) = jet_probe(model, cp, frame, beta, h)?;
        if best.as_ref().map_or(true, |(_, d)| disagreement < *d) {
            best = Some((value, disagreement));
        }
        if best.as_ref().is_some_and(|(_, d)| *d <= gate) {
            break;
        }
        h *= 0.5;
    }
    let (value, disagreement) = best.expect("at least one probe");
    if disagreement > gate {
        return Err(Error::JetIllConditioned(format!(
            "derivative order {p} at β = {beta:?}: Richardson levels differ by {disagreement:.3e} (gate {gate:.1e})"
        )));
    }
    Ok(value)
}

/// Taylor-expand `g` to total degree `order` by differentiating the exact
/// gradient `G = ∇g` (one derivative order less than `g` itself) and
/// integrating term-wise: `c_α(g) = b^{i}_{α − e_i} / α_i` for any `i` with
/// `α_i > 0`. Disagreement between different `i` is recorded as
/// `max_cross_error`.
///
/// Errors: [`Error::JetIllConditioned`] when the Richardson gate fails,
/// [`Error::InvalidInput`] for `order > 12`.
pub fn taylor_g(
    model: &ModelSpec,
    cp: &ChannelPoint,
    frame: &Frame,
    order: usize,
) -> Result<GJet> {
    if order > 12 {
        return Err(Error::InvalidInput(format!(
            "jet order {order} exceeds the supported maximum 12"
        )));
    }
    if order < 2 {
        return Err(Error::InvalidInput("jet order must be at least 2".into()));
    }
    let n = cp.omega.len();
    let vars = 2 * (n - 1);
    let mut coeffs: BTreeMap<Monomial, f64> = BTreeMap::new();
    let mut max_cross: f64 = 0.0;
    // b[β] holds the Taylor coefficients of every component of ∇g at β.
    let mut b: BTreeMap<Monomial, DVector<f64>> = BTreeMap::new();
    for beta in monomials_up_to(vars, order as u32 - 1) {
        let val = jet_coeff_checked(model, cp, frame, &beta.0)?;
        b.insert(beta, val);
    }
    for alpha in monomials_up_to(vars, order as u32) {
        let deg = alpha.degree();
        if deg == 0 {
            continue; // g(0) = 0 by construction.
        }
        let mut first: Option<f64> = None;
        for i in 0..vars {
            if alpha.0[i] == 0 {
                continue;
            }
            let mut beta = alpha.clone();
            beta.0[i] -= 1;
            let est = b[&beta][i] / alpha.0[i] as f64;
            match first {
                None => first = Some(est),
                Some(c) => max_cross = max_cross.max((est - c).abs()),
            }
        }
        coeffs.insert(alpha, first.expect("degree ≥ 1 has a positive exponent"));
    }
    Ok(GJet { vars, order, coeffs, max_cross_error: max_cross })
}

/// Linearization of the reduced flow at the channel:
/// `B = [[0, I], [−I, 0]]·A − [[I, 0], [0, 0]]` where `A` is the Hessian of
/// `g` at 0. In block form `B = [[A_ηu − I, A_ηη], [−A_uu, −A_uη]]`.
pub fn matrix_b(jet: &GJet) -> DMatrix<f64> {
    let d2 = jet.vars;
    let d = d2 / 2;
    let a = jet.hessian0();
    let mut b = DMatrix::zeros(d2, d2);
    for i in 0..d {
        for j in 0..d2 {
            b[(i, j)] = a[(d + i, j)];
            b[(d + i, j)] = -a[(i, j)];
        }
        b[(i, i)] -= 1.0;
    }
    b
}

/// Everything needed to study one channel locally.
#[derive(Debug, Clone)]
pub struct LocalModel {
    pub model: ModelSpec,
    pub channel: ChannelPoint,
    pub frame: Frame,
    pub jet: GJet,
    /// Reduced-flow linearization `B`.
    pub b: DMatrix<f64>,
}

impl LocalModel {
    /// Solve the channel, build a frame, expand `g`, and linearize.
    pub fn build(
        model: &ModelSpec,
        energy: f64,
        guess: &ChannelGuess,
        order: usize,
    ) -> Result<LocalModel> {
        let channel = find_channel_point(model, energy, guess)?;
        let frame = build_frame(&channel.omega, None);
        let jet = taylor_g(model, &channel, &frame, order)?;
        let b = matrix_b(&jet);
        Ok(LocalModel { model: model.clone(), channel, frame, jet, b })
    }

    /// Reduced vector field from the jet:
    /// `du/dτ = ∇_η g − u`, `dη/dτ = −∇_u g`.
    pub fn reduced_field(&self, w: &DVector<f64>) -> DVector<f64> {
        let d = self.jet.vars / 2;
        let grad = self.jet.grad(w);
        let mut out = DVector::zeros(2 * d);
        for i in 0..d {
            out[i] = grad[d + i] - w[i];
            out[d + i] = -grad[i];
        }
        out
    }

    /// Reduced vector field evaluated through the implicit solve rather
    /// than the jet — exact up to the model's own accuracy.
    pub fn reduced_field_exact(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.jet.vars / 2;
        let grad = grad_g_exact(&self.model, &self.channel, &self.frame, w)?;
        let mut out = DVector::zeros(2 * d);
        for i in 0..d {
            out[i] = grad[d + i] - w[i];
            out[d + i] = -grad[i];
        }
        Ok(out)
    }

    /// JSON report: channel data, frame, jet table, and `B`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "model": self.model.describe(),
            "energy": self.channel.energy,
            "channel": {
                "omega": self.channel.omega.as_slice(),
                "xi": self.channel.xi.as_slice(),
                "k": self.channel.k,
                "residual": self.channel.residual,
            },
            "frame": self.frame.tangent.iter().map(|t| t.as_slice().to_vec()).collect::<Vec<_>>(),
            "jet": {
                "order": self.jet.order,
                "max_cross_error": self.jet.max_cross_error,
                "coefficients": serde_json::Value::Object(self.jet.coeff_table()),
            },
            "matrix_b": matrix_rows(&self.b),
        })
    }
}

/// Row-major nested array for JSON.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}
