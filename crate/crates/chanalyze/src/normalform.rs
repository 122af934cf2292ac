//! Polynomial normal form of the reduced flow at a hyperbolic channel.
//!
//! In eigencoordinates `γ = T⁻¹w` the reduced field is
//! `γ̇ = Λγ + N(γ)` with `Λ = diag(β)`. This module constructs a scalar
//! observable `Γ(γ) = γ_l + Σ_{|α|≥2} c_α γ^α` satisfying
//!
//! ```text
//! dΓ/dτ = β₁ˢ Γ + O(|γ|^{m+1})
//! ```
//!
//! along the flow, by solving the homological equations
//! `(B̃_j − β₁ˢ I) c = −r_j` order by order. `B̃_j` acts on degree-`j`
//! coefficient vectors and is diagonal with entries `⟨δ, β⟩` for diagonal
//! `Λ`; a near-zero singular value of `B̃_j − β₁ˢ I` is a resonance and
//! aborts the construction.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serializer;

use crate::reduction::{GJet, LocalModel};
use crate::spectral::Spectrum;
use crate::{Error, Result};

/// Coefficients with modulus below this are dropped from polynomials.
const PRUNE_TOL: f64 = 1e-250;

/// Post-condition bound on surviving residual coefficients up to order `m`.
pub const GAMMA_RESIDUAL_TOL: f64 = 1e-9;

/// Relative σ_min threshold that classifies a homological solve as resonant.
pub const RESONANCE_SIGMA_TOL: f64 = 1e-8;

/// Exponent multi-index, ordered by total degree, then by descending
/// exponent tuple — so degree 2 in two variables lists `(2,0), (1,1), (0,2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn zero(vars: usize) -> Self {
        Monomial(vec![0; vars])
    }

    pub fn unit(vars: usize, i: usize) -> Self {
        let mut e = vec![0; vars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Key `"a1,a2,..."` used in JSON coefficient tables.
    pub fn key(&self) -> String {
        self.0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn eval_real(&self, w: &DVector<f64>) -> f64 {
        self.0.iter().enumerate().map(|(i, &e)| w[i].powi(e as i32)).product()
    }

    pub fn eval_complex(&self, z: &DVector<Complex64>) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for (i, &e) in self.0.iter().enumerate() {
            acc *= z[i].powu(e);
        }
        acc
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.key())
    }
}

impl serde::Serialize for Monomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.key())
    }
}

/// All monomials of exact total degree `degree` in `vars` variables, in the
/// canonical order (`C(degree + vars − 1, vars − 1)` of them).
pub fn monomials(vars: usize, degree: u32) -> Vec<Monomial> {
    fn gen(vars: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if vars == 1 {
            prefix.push(degree);
            out.push(Monomial(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=degree).rev() {
            prefix.push(e);
            gen(vars - 1, degree - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(vars);
    gen(vars, degree, &mut prefix, &mut out);
    out
}

/// All monomials of total degree `0..=max_degree`, ascending.
pub fn monomials_up_to(vars: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        out.extend(monomials(vars, d));
    }
    out
}

/// Number of monomials of exact degree `m` in `d` variables.
pub fn monomial_count(d: usize, m: u32) -> usize {
    // C(m + d − 1, d − 1)
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..(d as u128 - 1) {
        num *= m as u128 + d as u128 - 1 - i;
        den *= i + 1;
    }
    (num / den) as usize
}

/// Complex polynomial truncated at a total-degree cap.
#[derive(Debug, Clone)]
pub struct Poly {
    pub vars: usize,
    pub cap: u32,
    terms: BTreeMap<Monomial, Complex64>,
}

impl Poly {
    pub fn zero(vars: usize, cap: u32) -> Self {
        Poly { vars, cap, terms: BTreeMap::new() }
    }

    pub fn constant(vars: usize, cap: u32, c: Complex64) -> Self {
        let mut p = Poly::zero(vars, cap);
        p.add_term(Monomial::zero(vars), c);
        p
    }

    pub fn variable(vars: usize, cap: u32, i: usize) -> Self {
        let mut p = Poly::zero(vars, cap);
        p.add_term(Monomial::unit(vars, i), Complex64::new(1.0, 0.0));
        p
    }

    /// Real-coefficient polynomial from a chart jet.
    pub fn from_jet(jet: &GJet, cap: u32) -> Self {
        let mut p = Poly::zero(jet.vars, cap);
        for (alpha, &c) in &jet.coeffs {
            p.add_term(alpha.clone(), Complex64::new(c, 0.0));
        }
        p
    }

    pub fn add_term(&mut self, mono: Monomial, c: Complex64) {
        if mono.degree() > self.cap || c.norm() == 0.0 {
            return;
        }
        let updated = {
            let entry = self.terms.entry(mono.clone()).or_insert(Complex64::new(0.0, 0.0));
            *entry += c;
            entry.norm()
        };
        if updated < PRUNE_TOL {
            self.terms.remove(&mono);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, mono: &Monomial) -> Complex64 {
        self.terms.get(mono).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn with_cap(&self, cap: u32) -> Poly {
        let mut p = Poly::zero(self.vars, cap);
        for (m, &c) in &self.terms {
            p.add_term(m.clone(), c);
        }
        p
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut p = self.clone();
        for (m, &c) in &other.terms {
            p.add_term(m.clone(), c);
        }
        p
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        let mut p = Poly::zero(self.vars, self.cap);
        for (m, &c) in &self.terms {
            p.add_term(m.clone(), c * s);
        }
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut p = Poly::zero(self.vars, self.cap);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                if ma.degree() + mb.degree() > self.cap {
                    continue;
                }
                let mono =
                    Monomial(ma.0.iter().zip(&mb.0).map(|(a, b)| a + b).collect());
                p.add_term(mono, ca * cb);
            }
        }
        p
    }

    pub fn diff(&self, i: usize) -> Poly {
        let mut p = Poly::zero(self.vars, self.cap);
        for (m, &c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut d = m.clone();
            d.0[i] = e - 1;
            p.add_term(d, c * e as f64);
        }
        p
    }

    /// `P(Tz)` for a linear substitution `w = Tz` (square `T`).
    pub fn substitute_linear(&self, t: &DMatrix<Complex64>) -> Poly {
        let v = self.vars;
        assert_eq!(t.nrows(), v);
        assert_eq!(t.ncols(), v);
        let lin: Vec<Poly> = (0..v)
            .map(|i| {
                let mut p = Poly::zero(v, self.cap);
                for j in 0..v {
                    p.add_term(Monomial::unit(v, j), t[(i, j)]);
                }
                p
            })
            .collect();
        let mut out = Poly::zero(v, self.cap);
        for (m, &c) in &self.terms {
            let mut term = Poly::constant(v, self.cap, c);
            for (i, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    term = term.mul(&lin[i]);
                }
            }
            out = out.add(&term);
        }
        out
    }

    pub fn evaluate(&self, z: &DVector<Complex64>) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, &c) in &self.terms {
            acc += c * m.eval_complex(z);
        }
        acc
    }

    /// Coefficients of exact degree `m`, ordered like [`monomials`].
    pub fn degree_coeffs(&self, m: u32) -> Vec<Complex64> {
        monomials(self.vars, m).iter().map(|mono| self.coeff(mono)).collect()
    }

    /// Largest coefficient modulus among terms of degree `lo..=hi`.
    pub fn max_coeff_in_band(&self, lo: u32, hi: u32) -> f64 {
        self.terms
            .iter()
            .filter(|(m, _)| (lo..=hi).contains(&m.degree()))
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }
}

/// The homological operator on degree-`m` scalar coefficients for a linear
/// field `γ̇ = Λγ`: if `P = Σ c_δ γ^δ` then along the flow
/// `(dP/dτ)_ε = Σ_{i,k} (ε_i + 1 − [i=k]) Λ_{ik} c_{ε+e_i−e_k}`.
/// Returns the matrix in the [`monomials`] ordering.
pub fn homological_matrix(lambda: &DMatrix<Complex64>, m: u32) -> DMatrix<Complex64> {
    let d = lambda.nrows();
    let basis = monomials(d, m);
    let index: BTreeMap<Monomial, usize> =
        basis.iter().cloned().zip(0..basis.len()).collect();
    let q = basis.len();
    let mut bt = DMatrix::<Complex64>::zeros(q, q);
    for (row, eps) in basis.iter().enumerate() {
        for i in 0..d {
            for k in 0..d {
                let lam = lambda[(i, k)];
                if lam.norm() == 0.0 {
                    continue;
                }
                // δ = ε + e_i − e_k must be a valid exponent vector.
                let mut delta = eps.clone();
                delta.0[i] += 1;
                if delta.0[k] == 0 {
                    continue;
                }
                delta.0[k] -= 1;
                let col = index[&delta];
                let factor = eps.0[i] as f64 + if i == k { 0.0 } else { 1.0 };
                bt[(row, col)] += lam * factor;
            }
        }
    }
    bt
}

/// Solve one homological order: `(B̃ − β₁ˢ I) c = −r`.
///
/// Errors: [`Error::ResonanceDetected`] when `σ_min(B̃ − β₁ˢI)` falls below
/// [`RESONANCE_SIGMA_TOL`] relative to `σ_max`.
pub fn solve_order(
    btilde: &DMatrix<Complex64>,
    beta1s: Complex64,
    rhs: &DVector<Complex64>,
    order: u32,
) -> Result<DVector<Complex64>> {
    let q = btilde.nrows();
    let mut m = btilde.clone();
    for i in 0..q {
        m[(i, i)] -= beta1s;
    }
    let svd = m.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    if sigma_min < RESONANCE_SIGMA_TOL * sigma_max.max(1.0) {
        return Err(Error::ResonanceDetected { order: order as usize, sigma_min });
    }
    svd.solve(&rhs.map(|z| -z), 0.0)
        .map_err(|e| Error::InvalidInput(format!("homological solve failed: {e}")))
}

/// An adapted observable `Γ` with `dΓ/dτ = β₁ˢ Γ + O(|γ|^{m+1})`.
#[derive(Debug, Clone)]
pub struct NormalForm {
    /// Chart variable count `2(n−1)`.
    pub vars: usize,
    /// Normal-form order `m`.
    pub order: u32,
    /// Eigenvalues in eigenbasis column order (stable block first).
    pub beta: Vec<Complex64>,
    /// Tracked stable rate.
    pub beta1s: Complex64,
    /// Tracked eigencoordinate index.
    pub tracked: usize,
    pub t: DMatrix<Complex64>,
    pub t_inv: DMatrix<Complex64>,
    /// Reduced field in eigencoordinates, truncated at `order`.
    pub field: Vec<Poly>,
    /// The observable, a polynomial in `γ`.
    pub gamma: Poly,
    /// Calibration constant: the dominant η-entry of the tracked row of
    /// `T⁻¹`, used by [`NormalForm::eval_gamma_real`].
    pub c_l: Complex64,
    /// Residual polynomial `∇Γ·G − β₁ˢΓ` kept to degree `2·order` for decay
    /// diagnostics (its coefficients vanish through degree `order`).
    pub residual: Poly,
}

/// The reduced field as polynomials in the chart variables `w = (u, η)`:
/// `ẇ_u = ∇_η g − u`, `ẇ_η = −∇_u g`.
pub fn field_in_w(jet: &GJet, cap: u32) -> Vec<Poly> {
    let d2 = jet.vars;
    let d = d2 / 2;
    let g = Poly::from_jet(jet, cap + 1);
    let mut out = Vec::with_capacity(d2);
    for i in 0..d {
        let mut p = g.diff(d + i).with_cap(cap);
        p.add_term(Monomial::unit(d2, i), Complex64::new(-1.0, 0.0));
        out.push(p);
    }
    for i in 0..d {
        out.push(g.diff(i).scale(Complex64::new(-1.0, 0.0)).with_cap(cap));
    }
    out
}

/// Transform a polynomial field to eigencoordinates: `G = T⁻¹ F(Tγ)`.
pub fn field_in_gamma(
    field_w: &[Poly],
    t: &DMatrix<Complex64>,
    t_inv: &DMatrix<Complex64>,
) -> Vec<Poly> {
    let d2 = field_w.len();
    let substituted: Vec<Poly> = field_w.iter().map(|f| f.substitute_linear(t)).collect();
    (0..d2)
        .map(|j| {
            let mut acc = Poly::zero(d2, field_w[0].cap);
            for (i, s) in substituted.iter().enumerate() {
                acc = acc.add(&s.scale(t_inv[(j, i)]));
            }
            acc
        })
        .collect()
}

/// Lie derivative of a scalar polynomial along a polynomial field.
pub fn lie_derivative(p: &Poly, field: &[Poly]) -> Poly {
    let mut acc = Poly::zero(p.vars, p.cap);
    for (i, g) in field.iter().enumerate() {
        acc = acc.add(&p.diff(i).mul(g));
    }
    acc
}

impl NormalForm {
    /// Build the adapted observable at order `m` for the first stable rate.
    ///
    /// Errors: [`Error::NoStableDirections`] without a stable eigenvalue,
    /// [`Error::DefectiveBeyondTolerance`] if the eigenbasis fails to
    /// diagonalize the linear part to `1e−8`, [`Error::ResonanceDetected`]
    /// from the homological solves.
    pub fn build(lm: &LocalModel, spectrum: &Spectrum, order: u32) -> Result<NormalForm> {
        let d2 = lm.jet.vars;
        if order as usize + 1 > lm.jet.order {
            return Err(Error::InvalidInput(format!(
                "normal form order {order} needs a jet of order {} (have {})",
                order + 1,
                lm.jet.order
            )));
        }
        let beta = spectrum.all();
        let beta1s = spectrum.beta1s()?;
        let tracked = 0usize;
        let t = spectrum.t.clone();
        let t_inv = spectrum.t_inv.clone();

        let f_w = field_in_w(&lm.jet, order);
        let mut g_gamma = field_in_gamma(&f_w, &t, &t_inv);
        // The linear part must match diag(β); then replace it exactly so the
        // homological bookkeeping is not polluted by O(1e−12) off-diagonals.
        let scale = lm.b.norm().max(1.0);
        for (j, gj) in g_gamma.iter_mut().enumerate() {
            for k in 0..d2 {
                let c = gj.coeff(&Monomial::unit(d2, k));
                let target = if j == k { beta[j] } else { Complex64::new(0.0, 0.0) };
                if (c - target).norm() > 1e-8 * scale {
                    return Err(Error::DefectiveBeyondTolerance(format!(
                        "eigenbasis does not linearize the field: component ({j},{k}) is {c} (expected {target})"
                    )));
                }
                gj.add_term(Monomial::unit(d2, k), target - c);
            }
        }

        let lambda = DMatrix::from_fn(d2, d2, |i, j| {
            if i == j { beta[i] } else { Complex64::new(0.0, 0.0) }
        });
        let mut gamma = Poly::variable(d2, order, tracked);
        for deg in 2..=order {
            let residual = lie_derivative(&gamma, &g_gamma).add(&gamma.scale(-beta1s));
            let rhs = DVector::from_vec(residual.degree_coeffs(deg));
            if rhs.norm() == 0.0 {
                continue;
            }
            let btilde = homological_matrix(&lambda, deg);
            let c = solve_order(&btilde, beta1s, &rhs, deg)?;
            for (mono, coeff) in monomials(d2, deg).into_iter().zip(c.iter()) {
                gamma.add_term(mono, *coeff);
            }
        }

        // Post-condition: the residual vanishes through degree `order`.
        let wide_field: Vec<Poly> = g_gamma.iter().map(|p| p.with_cap(2 * order)).collect();
        let wide_gamma = gamma.with_cap(2 * order);
        let residual = lie_derivative(&wide_gamma, &wide_field)
            .add(&wide_gamma.scale(-beta1s));
        let surviving = residual.max_coeff_in_band(0, order);
        if surviving > GAMMA_RESIDUAL_TOL {
            return Err(Error::RefinementFailed(format!(
                "normal-form post-condition failed: residual coefficient {surviving:.3e} at order ≤ {order}"
            )));
        }

        let d = d2 / 2;
        let v_row = t_inv.row(tracked);
        let pick = |range: std::ops::Range<usize>| -> Option<Complex64> {
            let mut best: Option<Complex64> = None;
            for i in range {
                let c = v_row[i];
                if best.map_or(true, |b| c.norm() > b.norm()) {
                    best = Some(c);
                }
            }
            best.filter(|c| c.norm() >= 1e-8)
        };
        let c_l = pick(d..d2)
            .or_else(|| pick(0..d))
            .ok_or_else(|| Error::DefectiveBeyondTolerance(
                "tracked left eigenvector has no significant component".into(),
            ))?;

        Ok(NormalForm {
            vars: d2,
            order,
            beta,
            beta1s,
            tracked,
            t,
            t_inv,
            field: g_gamma,
            gamma,
            c_l,
            residual,
        })
    }

    /// Eigencoordinates of a real chart point.
    pub fn gamma_coords(&self, w: &DVector<f64>) -> DVector<Complex64> {
        let wc = DVector::from_fn(self.vars, |i, _| Complex64::new(w[i], 0.0));
        &self.t_inv * wc
    }

    /// `Γ` evaluated at a real chart point.
    pub fn eval_gamma(&self, w: &DVector<f64>) -> Complex64 {
        self.gamma.evaluate(&self.gamma_coords(w))
    }

    /// Real-calibrated observable `Re(Γ/c_l)`.
    pub fn eval_gamma_real(&self, w: &DVector<f64>) -> f64 {
        (self.eval_gamma(w) / self.c_l).re
    }

    /// Polynomial residual `|∇Γ·G − β₁ˢΓ|` at a real chart point.
    pub fn residual_poly_at(&self, w: &DVector<f64>) -> f64 {
        self.residual.evaluate(&self.gamma_coords(w)).norm()
    }

    /// Honest residual against an externally supplied field value `ẇ`
    /// (e.g. the implicit-solve reduced field):
    /// `∇_w(Γ∘T⁻¹)·ẇ − β₁ˢ Γ`.
    pub fn residual_against(&self, w: &DVector<f64>, w_dot: &DVector<f64>) -> Complex64 {
        let gz = self.gamma_coords(w);
        let mut grad_gamma = DVector::from_element(self.vars, Complex64::new(0.0, 0.0));
        for i in 0..self.vars {
            grad_gamma[i] = self.gamma.diff(i).evaluate(&gz);
        }
        // ∇_w (Γ∘T⁻¹) = (T⁻¹)ᵀ ∇_γ Γ.
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.vars {
            let mut gj = Complex64::new(0.0, 0.0);
            for i in 0..self.vars {
                gj += self.t_inv[(i, j)] * grad_gamma[i];
            }
            acc += gj * w_dot[j];
        }
        acc - self.beta1s * self.gamma.evaluate(&gz)
    }

    /// Max polynomial residual over seeded directions at each radius.
    pub fn residual_decay(&self, radii: &[f64], samples: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs: Vec<DVector<f64>> = (0..samples)
            .map(|_| {
                loop {
                    let v = DVector::from_fn(self.vars, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
                    let n = v.norm();
                    if n > 0.1 {
                        return v / n;
                    }
                }
            })
            .collect();
        radii
            .iter()
            .map(|&r| {
                let worst = dirs
                    .iter()
                    .map(|d| self.residual_poly_at(&(d * r)))
                    .fold(0.0, f64::max);
                (r, worst)
            })
            .collect()
    }

    /// JSON report of the observable.
    pub fn to_json(&self) -> serde_json::Value {
        let mut coeffs = serde_json::Map::new();
        for (m, c) in self.gamma.terms() {
            coeffs.insert(m.key(), serde_json::json!([c.re, c.im]));
        }
        serde_json::json!({
            "order": self.order,
            "beta": self.beta.iter().map(|b| [b.re, b.im]).collect::<Vec<_>>(),
            "beta1s": [self.beta1s.re, self.beta1s.im],
            "tracked": self.tracked,
            "coefficients": serde_json::Value::Object(coeffs),
        })
    }
}

/// Least-squares slope of `ln y` against `ln x` (pairs with `y ≤ 0` are
/// skipped).
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = data.len() as f64;
    if data.len() < 2 {
        return f64::NAN;
    }
    let mx = data.iter().map(|p| p.0).sum::<f64>() / n;
    let my = data.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = data.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = data.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order() {
        let ms = monomials(2, 2);
        assert_eq!(ms, vec![Monomial(vec![2, 0]), Monomial(vec![1, 1]), Monomial(vec![0, 2])]);
        assert_eq!(monomial_count(2, 2), 3);
        assert_eq!(monomial_count(3, 4), 15);
    }

    #[test]
    fn homological_spectrum_is_weighted_degrees() {
        // Λ = diag(−2, 1), degree 2: eigenvalues ⟨δ, β⟩ = {−4, −1, 2}.
        let lambda = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(-2.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        let bt = homological_matrix(&lambda, 2);
        let mut diag: Vec<f64> = (0..3).map(|i| bt[(i, i)].re).collect();
        diag.sort_by(f64::total_cmp);
        assert_eq!(diag, vec![-4.0, -1.0, 2.0]);
    }

    #[test]
    fn poly_product_truncates() {
        let x = Poly::variable(2, 3, 0);
        let y = Poly::variable(2, 3, 1);
        let p = x.add(&y); // x + y
        let q = p.mul(&p).mul(&p); // (x+y)^3 capped at 3
        assert_eq!(q.coeff(&Monomial(vec![2, 1])), Complex64::new(3.0, 0.0));
        let q4 = q.mul(&p); // degree 4 terms all truncated away
        assert!(q4.is_zero());
    }
}
