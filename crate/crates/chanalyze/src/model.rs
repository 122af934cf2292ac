//! Hamiltonian model families: evaluation, gradients, Hessians, the
//! degree-zero homogeneity check and smooth regularization near `x = 0`.
//!
//! All built-in families are classical symbols `h(x, ξ)` on `R^n × R^n`,
//! smooth away from an excluded set. Families that are homogeneous of degree
//! zero in `x` (equivalently `x·∇_x h = 0`) support the channel reduction
//! directly; the others ([`ModelSpec::Riema2`], [`ModelSpec::Riema3`],
//! [`ModelSpec::Spiral`]) first pass through the transforms in
//! [`crate::geometry`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A position/momentum pair `(x, ξ)` in `R^n × R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: DVector<f64>,
    pub xi: DVector<f64>,
}

impl PhasePoint {
    /// Panics if the two vectors differ in length or `n < 2`.
    pub fn new(x: DVector<f64>, xi: DVector<f64>) -> Self {
        assert_eq!(x.len(), xi.len(), "x and xi must have equal length");
        assert!(x.len() >= 2, "phase space dimension must be >= 2");
        PhasePoint { x, xi }
    }

    pub fn from_slices(x: &[f64], xi: &[f64]) -> Self {
        Self::new(DVector::from_row_slice(x), DVector::from_row_slice(xi))
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Flatten into a single state vector `(x, ξ)` of length `2n`.
    pub fn to_state(&self) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(2 * n, |i, _| if i < n { self.x[i] } else { self.xi[i - n] })
    }

    pub fn from_state(state: &DVector<f64>) -> Self {
        let n = state.len() / 2;
        PhasePoint {
            x: DVector::from_fn(n, |i, _| state[i]),
            xi: DVector::from_fn(n, |i, _| state[n + i]),
        }
    }
}

/// Real trigonometric polynomial `c0 + Σ_k (a_k cos kθ + b_k sin kθ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub c0: f64,
    /// `cos[k-1]` multiplies `cos(kθ)`.
    pub cos: Vec<f64>,
    /// `sin[k-1]` multiplies `sin(kθ)`.
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn constant(c0: f64) -> Self {
        TrigPoly { c0, cos: vec![], sin: vec![] }
    }

    /// `coeff·cos(kθ)` for `k ≥ 1`.
    pub fn cosine(k: usize, coeff: f64) -> Self {
        let mut cos = vec![0.0; k];
        cos[k - 1] = coeff;
        TrigPoly { c0: 0.0, cos, sin: vec![] }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.eval_deriv(theta, 0)
    }

    pub fn d1(&self, theta: f64) -> f64 {
        self.eval_deriv(theta, 1)
    }

    pub fn d2(&self, theta: f64) -> f64 {
        self.eval_deriv(theta, 2)
    }

    /// Value of the `order`-th derivative at `theta`.
    pub fn eval_deriv(&self, theta: f64, order: usize) -> f64 {
        let mut acc = if order == 0 { self.c0 } else { 0.0 };
        for (i, &a) in self.cos.iter().enumerate() {
            let k = (i + 1) as f64;
            // d/dθ cos(kθ) cycles through -k sin, -k² cos, k³ sin, k⁴ cos.
            let amp = a * k.powi(order as i32);
            acc += match order % 4 {
                0 => amp * (k * theta).cos(),
                1 => -amp * (k * theta).sin(),
                2 => -amp * (k * theta).cos(),
                _ => amp * (k * theta).sin(),
            };
        }
        for (i, &b) in self.sin.iter().enumerate() {
            let k = (i + 1) as f64;
            let amp = b * k.powi(order as i32);
            acc += match order % 4 {
                0 => amp * (k * theta).sin(),
                1 => amp * (k * theta).cos(),
                2 => -amp * (k * theta).sin(),
                _ => -amp * (k * theta).cos(),
            };
        }
        acc
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().all(|&a| a == 0.0) && self.sin.iter().all(|&b| b == 0.0)
    }
}

impl fmt::Display for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.c0 != 0.0 {
            parts.push(format!("{}", self.c0));
        }
        for (i, &a) in self.cos.iter().enumerate() {
            if a != 0.0 {
                parts.push(format!("{}cos{}", a, i + 1));
            }
        }
        for (i, &b) in self.sin.iter().enumerate() {
            if b != 0.0 {
                parts.push(format!("{}sin{}", b, i + 1));
            }
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        write!(f, "{}", parts.join("+").replace("+-", "-"))
    }
}

impl FromStr for TrigPoly {
    type Err = Error;

    /// Parses sums of terms like `cos`, `2cos`, `0.5sin2`, `-1.5`,
    /// e.g. `"2cos-sin3+0.25"`. A bare `cos`/`sin` means harmonic 1 with
    /// coefficient 1.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::InvalidInput("empty trigonometric polynomial".into()));
        }
        let mut out = TrigPoly::constant(0.0);
        let bytes = compact.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let mut sign = 1.0;
            while i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                if bytes[i] == b'-' {
                    sign = -sign;
                }
                i += 1;
            }
            let num_start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let coeff = if num_start == i {
                1.0
            } else {
                compact[num_start..i]
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad coefficient in '{s}': {e}")))?
            };
            if i < bytes.len() && bytes[i] == b'*' {
                i += 1;
            }
            let kind = if compact[i..].starts_with("cos") {
                i += 3;
                Some(true)
            } else if compact[i..].starts_with("sin") {
                i += 3;
                Some(false)
            } else {
                None
            };
            match kind {
                None => {
                    if num_start == i {
                        return Err(Error::InvalidInput(format!(
                            "unexpected token at byte {i} in '{s}'"
                        )));
                    }
                    out.c0 += sign * coeff;
                }
                Some(is_cos) => {
                    let k_start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let k: usize = if k_start == i {
                        1
                    } else {
                        compact[k_start..i].parse().map_err(|e| {
                            Error::InvalidInput(format!("bad harmonic in '{s}': {e}"))
                        })?
                    };
                    if k == 0 {
                        return Err(Error::InvalidInput(format!("harmonic 0 in '{s}'")));
                    }
                    let store = if is_cos { &mut out.cos } else { &mut out.sin };
                    if store.len() < k {
                        store.resize(k, 0.0);
                    }
                    store[k - 1] += sign * coeff;
                }
            }
        }
        Ok(out)
    }
}

/// C∞ monotone cutoff: 0 below `lower`, 1 above `upper`, in between the
/// normalized integral of `exp(-1/(s(1-s)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothStep {
    pub lower: f64,
    pub upper: f64,
    norm: f64,
}

fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

/// Composite Simpson on `[0, b]` with `n` (even) intervals.
fn simpson_bump(b: f64, n: usize) -> f64 {
    let h = b / n as f64;
    let mut acc = bump(0.0) + bump(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * bump(k as f64 * h);
    }
    acc * h / 3.0
}

impl SmoothStep {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(upper > lower) {
            return Err(Error::InvalidInput(format!(
                "smooth step requires upper > lower (got {lower}, {upper})"
            )));
        }
        Ok(SmoothStep { lower, upper, norm: simpson_bump(1.0, 2048) })
    }

    /// Default regularization band used for sphere potentials.
    pub fn default_regularization() -> Self {
        Self::new(0.5, 1.0).expect("valid default band")
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.lower {
            0.0
        } else if t >= self.upper {
            1.0
        } else {
            let s = (t - self.lower) / (self.upper - self.lower);
            (simpson_bump(s, 2048) / self.norm).clamp(0.0, 1.0)
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        if t <= self.lower || t >= self.upper {
            0.0
        } else {
            let s = (t - self.lower) / (self.upper - self.lower);
            bump(s) / (self.norm * (self.upper - self.lower))
        }
    }
}

/// Sphere potential for [`ModelSpec::MorseSphere`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MorsePotential {
    /// `n = 2`: a trigonometric polynomial `V(θ)` on the circle.
    Trig(TrigPoly),
    /// `n ≥ 3`: local data of one non-degenerate critical point — direction
    /// `omega`, Hessian eigenvalues `q`, and value `v0`. Realized as the
    /// degree-zero quadratic `V(x) = v0 + ½ Σ q_j ((x·e_j)/(x·omega))²` on
    /// the half-space `x·omega > 0`, with `{e_j}` an orthonormal completion
    /// of `omega`.
    CriticalPoint {
        omega: DVector<f64>,
        q: Vec<f64>,
        v0: f64,
        frame: Vec<DVector<f64>>,
    },
}

/// Orthonormal completion of the unit vector `omega` (deterministic: seeded
/// from the standard basis, most-parallel axis dropped).
fn orthonormal_completion(omega: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = omega.len();
    let skip = (0..n).max_by(|&i, &j| omega[i].abs().total_cmp(&omega[j].abs())).unwrap();
    let mut frame: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    for i in (0..n).filter(|&i| i != skip) {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v -= omega * omega.dot(&v);
        for w in &frame {
            let proj = w.dot(&v);
            v -= w * proj;
        }
        let norm = v.norm();
        v /= norm;
        frame.push(v);
    }
    frame
}

/// A user-supplied Hamiltonian with optional analytic gradient.
#[derive(Clone)]
pub struct CustomModel {
    pub n: usize,
    pub name: String,
    pub h: Arc<dyn Fn(&PhasePoint) -> f64 + Send + Sync>,
    #[allow(clippy::type_complexity)]
    pub grad: Option<Arc<dyn Fn(&PhasePoint) -> (DVector<f64>, DVector<f64>) + Send + Sync>>,
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomModel")
            .field("n", &self.n)
            .field("name", &self.name)
            .field("analytic_grad", &self.grad.is_some())
            .finish()
    }
}

/// Tagged Hamiltonian families.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// `h = ½(1 + a·x₂²/|x|²)⁻¹ξ₁² + ½ξ₂²` on `R²`, degree zero in `x`.
    MetricExample11 { a: f64 },
    /// `h = ½ξ² + V(x̂)`, optionally regularized to `½ξ² + F(|x|)V(x̂)`.
    MorseSphere {
        n: usize,
        potential: MorsePotential,
        regularize: Option<SmoothStep>,
    },
    /// `h = ½(|x|² − aξ₂²)⁻¹|ξ|²` on `R²`: degree zero only in the joint
    /// variable `(x, ξ)`.
    Riema2 { a: f64 },
    /// `h = ½(x₁² + b·x₂²)^{κ/2}|ξ|²` on `R²`: two-parameter homogeneous,
    /// degree `κ` in `x` and `2` in `ξ`.
    Riema3 { b: f64, kappa: f64 },
    /// `h = ½e^{f(θ − c·ln r)}|ξ|²` on `R²`: invariant under the spiral
    /// scaling field, not under plain dilations.
    Spiral { f: TrigPoly, c: f64 },
    /// The spiral model conjugated by the rotation `x ↦ R(−c·ln r)x`
    /// (canonically lifted), which makes it degree zero:
    /// `h̃ = ½e^{f(θ)}((p_r − c·p_θ)² + p_θ²)` with `p_r = x̂·ξ`,
    /// `p_θ = x̂⊥·ξ`.
    SpiralHomogenized { f: TrigPoly, c: f64 },
    /// `h̃(x, ξ) = base(x̂, ξ + (s⁻¹−1)⟨x̂,ξ⟩x̂)`: the two-parameter
    /// homogenization transform, degree zero in `x` by construction.
    Homogenized { base: Box<ModelSpec>, s: f64 },
    /// Generic callable Hamiltonian.
    Custom(CustomModel),
}

impl ModelSpec {
    pub fn metric_example11(a: f64) -> Result<Self> {
        if a <= 0.0 {
            return Err(Error::InvalidInput(format!("metric11 requires a > 0, got {a}")));
        }
        Ok(ModelSpec::MetricExample11 { a })
    }

    /// Circle potential (`n = 2`), optionally regularized near the origin.
    pub fn morse_trig(v: TrigPoly, regularize: bool) -> Self {
        ModelSpec::MorseSphere {
            n: 2,
            potential: MorsePotential::Trig(v),
            regularize: regularize.then(SmoothStep::default_regularization),
        }
    }

    /// Sphere potential from critical-point data (`n ≥ 3`).
    pub fn morse_critical(omega: DVector<f64>, q: Vec<f64>, v0: f64, regularize: bool) -> Result<Self> {
        let n = omega.len();
        if n < 3 {
            return Err(Error::InvalidInput("critical-point data requires n >= 3".into()));
        }
        if q.len() != n - 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} Hessian eigenvalues, got {}",
                n - 1,
                q.len()
            )));
        }
        let omega = omega.normalize();
        let frame = orthonormal_completion(&omega);
        Ok(ModelSpec::MorseSphere {
            n,
            potential: MorsePotential::CriticalPoint { omega, q, v0, frame },
            regularize: regularize.then(SmoothStep::default_regularization),
        })
    }

    pub fn riema2(a: f64) -> Result<Self> {
        if a <= 0.0 {
            return Err(Error::InvalidInput(format!("riema2 requires a > 0, got {a}")));
        }
        Ok(ModelSpec::Riema2 { a })
    }

    pub fn riema3(b: f64, kappa: f64) -> Result<Self> {
        if b <= 0.0 || kappa >= 2.0 || kappa * (b - 1.0) >= 0.0 {
            return Err(Error::InvalidInput(format!(
                "riema3 requires b > 0, kappa < 2 and kappa(b-1) < 0, got b = {b}, kappa = {kappa}"
            )));
        }
        Ok(ModelSpec::Riema3 { b, kappa })
    }

    pub fn spiral(f: TrigPoly, c: f64) -> Result<Self> {
        Self::spiral_params_ok(&f, c)?;
        Ok(ModelSpec::Spiral { f, c })
    }

    pub fn spiral_homogenized(f: TrigPoly, c: f64) -> Result<Self> {
        Self::spiral_params_ok(&f, c)?;
        Ok(ModelSpec::SpiralHomogenized { f, c })
    }

    fn spiral_params_ok(f: &TrigPoly, c: f64) -> Result<()> {
        if c <= 0.0 {
            return Err(Error::InvalidInput(format!("spiral requires c > 0, got {c}")));
        }
        if f.is_constant() {
            return Err(Error::InvalidInput("spiral requires a non-constant f".into()));
        }
        Ok(())
    }

    /// Spatial dimension `n`.
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::MetricExample11 { .. }
            | ModelSpec::Riema2 { .. }
            | ModelSpec::Riema3 { .. }
            | ModelSpec::Spiral { .. }
            | ModelSpec::SpiralHomogenized { .. } => 2,
            ModelSpec::MorseSphere { n, .. } => *n,
            ModelSpec::Homogenized { base, .. } => base.dim(),
            ModelSpec::Custom(c) => c.n,
        }
    }

    /// Evaluate `h(x, ξ)`.
    pub fn eval_h(&self, p: &PhasePoint) -> Result<f64> {
        match self {
            ModelSpec::MetricExample11 { a } => {
                let r2 = p.x.norm_squared();
                if r2 == 0.0 {
                    return Err(Error::EvaluationAtSingularity("metric11 at x = 0".into()));
                }
                let g = 1.0 + a * p.x[1] * p.x[1] / r2;
                Ok(0.5 * p.xi[0] * p.xi[0] / g + 0.5 * p.xi[1] * p.xi[1])
            }
            ModelSpec::MorseSphere { potential, regularize, .. } => {
                let kinetic = 0.5 * p.xi.norm_squared();
                Ok(kinetic + morse_potential_value(potential, regularize, &p.x)?)
            }
            ModelSpec::Riema2 { a } => {
                let d = p.x.norm_squared() - a * p.xi[1] * p.xi[1];
                if d <= 1e-12 * (1.0 + p.x.norm_squared()) {
                    return Err(Error::EvaluationAtSingularity(format!(
                        "riema2 metric degenerate: |x|^2 - a xi_2^2 = {d:.3e}"
                    )));
                }
                Ok(0.5 * p.xi.norm_squared() / d)
            }
            ModelSpec::Riema3 { b, kappa } => {
                let pq = p.x[0] * p.x[0] + b * p.x[1] * p.x[1];
                if pq <= 0.0 {
                    return Err(Error::EvaluationAtSingularity("riema3 at x = 0".into()));
                }
                Ok(0.5 * pq.powf(kappa / 2.0) * p.xi.norm_squared())
            }
            ModelSpec::Spiral { f, c } => {
                let r = p.x.norm();
                if r == 0.0 {
                    return Err(Error::EvaluationAtSingularity("spiral at x = 0".into()));
                }
                let w = p.x[1].atan2(p.x[0]) - c * r.ln();
                Ok(0.5 * f.value(w).exp() * p.xi.norm_squared())
            }
            ModelSpec::SpiralHomogenized { f, c } => {
                let r = p.x.norm();
                if r == 0.0 {
                    return Err(Error::EvaluationAtSingularity("spiral at x = 0".into()));
                }
                let theta = p.x[1].atan2(p.x[0]);
                let (pr, pt) = radial_momenta(&p.x, &p.xi);
                let q = (pr - c * pt).powi(2) + pt * pt;
                Ok(0.5 * f.value(theta).exp() * q)
            }
            ModelSpec::Homogenized { base, s } => {
                let q = homogenized_point(p, *s)?;
                base.eval_h(&q)
            }
            ModelSpec::Custom(c) => Ok((c.h)(p)),
        }
    }

    /// `(∇_x h, ∇_ξ h)`: analytic for built-in families, finite differences
    /// for [`ModelSpec::Custom`] models without a supplied gradient.
    pub fn grad(&self, p: &PhasePoint) -> Result<(DVector<f64>, DVector<f64>)> {
        match self {
            ModelSpec::MetricExample11 { a } => {
                let r2 = p.x.norm_squared();
                if r2 == 0.0 {
                    return Err(Error::EvaluationAtSingularity("metric11 at x = 0".into()));
                }
                let (x1, x2) = (p.x[0], p.x[1]);
                let g = 1.0 + a * x2 * x2 / r2;
                let gx = DVector::from_vec(vec![
                    -0.5 * p.xi[0] * p.xi[0] / (g * g) * a * (-2.0 * x1 * x2 * x2 / (r2 * r2)),
                    -0.5 * p.xi[0] * p.xi[0] / (g * g) * a * (2.0 * x2 * x1 * x1 / (r2 * r2)),
                ]);
                let gxi = DVector::from_vec(vec![p.xi[0] / g, p.xi[1]]);
                Ok((gx, gxi))
            }
            ModelSpec::MorseSphere { potential, regularize, .. } => {
                let gx = morse_potential_grad(potential, regularize, &p.x)?;
                Ok((gx, p.xi.clone()))
            }
            ModelSpec::Riema2 { a } => {
                let d = p.x.norm_squared() - a * p.xi[1] * p.xi[1];
                if d <= 1e-12 * (1.0 + p.x.norm_squared()) {
                    return Err(Error::EvaluationAtSingularity(format!(
                        "riema2 metric degenerate: |x|^2 - a xi_2^2 = {d:.3e}"
                    )));
                }
                let q2 = p.xi.norm_squared();
                let gx = -(q2 / (d * d)) * &p.x;
                let mut gxi = &p.xi / d;
                gxi[1] += a * q2 * p.xi[1] / (d * d);
                Ok((gx, gxi))
            }
            ModelSpec::Riema3 { b, kappa } => {
                let pq = p.x[0] * p.x[0] + b * p.x[1] * p.x[1];
                if pq <= 0.0 {
                    return Err(Error::EvaluationAtSingularity("riema3 at x = 0".into()));
                }
                let q2 = p.xi.norm_squared();
                let scale = 0.5 * kappa * pq.powf(kappa / 2.0 - 1.0) * q2;
                let gx = DVector::from_vec(vec![scale * p.x[0], scale * b * p.x[1]]);
                let gxi = pq.powf(kappa / 2.0) * &p.xi;
                Ok((gx, gxi))
            }
            ModelSpec::Spiral { f, c } => {
                let r2 = p.x.norm_squared();
                if r2 == 0.0 {
                    return Err(Error::EvaluationAtSingularity("spiral at x = 0".into()));
                }
                let w = p.x[1].atan2(p.x[0]) - c * r2.sqrt().ln();
                let ef = f.value(w).exp();
                let q2 = p.xi.norm_squared();
                let pref = 0.5 * ef * q2 * f.d1(w) / r2;
                let gx = DVector::from_vec(vec![
                    pref * (-p.x[1] - c * p.x[0]),
                    pref * (p.x[0] - c * p.x[1]),
                ]);
                Ok((gx, ef * &p.xi))
            }
            ModelSpec::SpiralHomogenized { f, c } => {
                let r = p.x.norm();
                if r == 0.0 {
                    return Err(Error::EvaluationAtSingularity("spiral at x = 0".into()));
                }
                let theta = p.x[1].atan2(p.x[0]);
                let xh = &p.x / r;
                let xperp = DVector::from_vec(vec![-xh[1], xh[0]]);
                let (pr, pt) = (xh.dot(&p.xi), xperp.dot(&p.xi));
                let ef = f.value(theta).exp();
                let q = (pr - c * pt).powi(2) + pt * pt;
                let dh_dtheta =
                    0.5 * ef * f.d1(theta) * q + ef * c * (pr * pr - pt * pt - c * pr * pt);
                let gx = DVector::from_vec(vec![
                    dh_dtheta * (-p.x[1] / (r * r)),
                    dh_dtheta * (p.x[0] / (r * r)),
                ]);
                let gxi = ((&xh - &xperp * *c) * (pr - c * pt) + &xperp * pt) * ef;
                Ok((gx, gxi))
            }
            ModelSpec::Homogenized { base, s } => {
                if base.has_analytic_grad() {
                    homogenized_grad_chain(base, *s, p)
                } else {
                    self.grad_fd(p)
                }
            }
            ModelSpec::Custom(c) => match &c.grad {
                Some(g) => Ok(g(p)),
                None => self.grad_fd(p),
            },
        }
    }

    /// Whether [`ModelSpec::grad`] is analytic (no finite differences).
    pub fn has_analytic_grad(&self) -> bool {
        match self {
            ModelSpec::Homogenized { base, .. } => base.has_analytic_grad(),
            ModelSpec::Custom(c) => c.grad.is_some(),
            _ => true,
        }
    }

    /// Gradient by 4th-order central differences with Richardson
    /// extrapolation, step `1e-4·(1 + |coordinate|)`.
    pub fn grad_fd(&self, p: &PhasePoint) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = p.dim();
        let mut gx = DVector::zeros(n);
        let mut gxi = DVector::zeros(n);
        for i in 0..2 * n {
            let base = if i < n { p.x[i] } else { p.xi[i - n] };
            let h = 1e-4 * (1.0 + base.abs());
            let eval = |t: f64| -> Result<f64> {
                let mut q = p.clone();
                if i < n {
                    q.x[i] += t;
                } else {
                    q.xi[i - n] += t;
                }
                self.eval_h(&q)
            };
            let stencil = |hh: f64| -> Result<f64> {
                Ok((-eval(2.0 * hh)? + 8.0 * eval(hh)? - 8.0 * eval(-hh)? + eval(-2.0 * hh)?)
                    / (12.0 * hh))
            };
            let d = (16.0 * stencil(0.5 * h)? - stencil(h)?) / 15.0;
            if i < n {
                gx[i] = d;
            } else {
                gxi[i - n] = d;
            }
        }
        Ok((gx, gxi))
    }

    /// Full `2n×2n` second-derivative matrix in `(x, ξ)` ordering, by
    /// 4th-order differences of [`ModelSpec::grad`].
    pub fn hessian(&self, p: &PhasePoint) -> Result<DMatrix<f64>> {
        let n = p.dim();
        let mut hess = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..2 * n {
            let base = if j < n { p.x[j] } else { p.xi[j - n] };
            let h = 1e-4 * (1.0 + base.abs());
            let eval = |t: f64| -> Result<DVector<f64>> {
                let mut q = p.clone();
                if j < n {
                    q.x[j] += t;
                } else {
                    q.xi[j - n] += t;
                }
                let (gx, gxi) = self.grad(&q)?;
                let mut out = DVector::zeros(2 * n);
                out.rows_mut(0, n).copy_from(&gx);
                out.rows_mut(n, n).copy_from(&gxi);
                Ok(out)
            };
            let stencil = |hh: f64| -> Result<DVector<f64>> {
                Ok((-eval(2.0 * hh)? + 8.0 * eval(hh)? - 8.0 * eval(-hh)? + eval(-2.0 * hh)?)
                    / (12.0 * hh))
            };
            let col = (16.0 * stencil(0.5 * h)? - stencil(h)?) / 15.0;
            hess.set_column(j, &col);
        }
        // Symmetrize: mixed partials commute for smooth h.
        let ht = hess.transpose();
        Ok((hess + ht) * 0.5)
    }

    /// Hamiltonian vector field `(∇_ξ h, −∇_x h)` as a flat `2n` state
    /// derivative; used by the integrators and geometry checks.
    pub fn hamiltonian_field(&self, p: &PhasePoint) -> Result<DVector<f64>> {
        let n = p.dim();
        let (gx, gxi) = self.grad(p)?;
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&gxi);
        out.rows_mut(n, n).copy_from(&(-gx));
        Ok(out)
    }

    /// Max deviation `|h(λx, ξ) − h(x, ξ)|` over seeded samples with
    /// `|x| > r0` and scales `λ ≥ 1`; flags pass/fail against `tol`.
    pub fn check_homogeneity(
        &self,
        sample_count: usize,
        scales: &[f64],
        r0: f64,
        tol: f64,
        seed: u64,
    ) -> HomogeneityReport {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_dev: f64 = 0.0;
        let mut used = 0;
        let mut attempts = 0;
        while used < sample_count && attempts < 50 * sample_count.max(1) {
            attempts += 1;
            let dir = random_unit(&mut rng, n);
            let radius = r0 + 0.1 + rng.gen::<f64>() * 2.0;
            let x = dir * radius;
            let xi = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 3.0 - 1.5);
            let p = PhasePoint::new(x.clone(), xi.clone());
            let h0 = match self.eval_h(&p) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let mut ok = true;
            let mut dev: f64 = 0.0;
            for &lambda in scales {
                let q = PhasePoint::new(&x * lambda, xi.clone());
                match self.eval_h(&q) {
                    Ok(v) => dev = dev.max((v - h0).abs()),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                max_dev = max_dev.max(dev);
                used += 1;
            }
        }
        HomogeneityReport { max_deviation: max_dev, tol, pass: max_dev <= tol, samples: used }
    }

    /// JSON echo of the model for reports.
    pub fn describe(&self) -> serde_json::Value {
        match self {
            ModelSpec::MetricExample11 { a } => serde_json::json!({"family": "metric11", "a": a}),
            ModelSpec::MorseSphere { n, potential, regularize } => {
                let pot = match potential {
                    MorsePotential::Trig(v) => serde_json::json!({"type": "trig", "V": v.to_string()}),
                    MorsePotential::CriticalPoint { omega, q, v0, .. } => serde_json::json!({
                        "type": "critical-point",
                        "omega": omega.as_slice(),
                        "q": q,
                        "v0": v0,
                    }),
                };
                serde_json::json!({
                    "family": "morse",
                    "n": n,
                    "potential": pot,
                    "regularize": regularize.is_some(),
                })
            }
            ModelSpec::Riema2 { a } => serde_json::json!({"family": "riema2", "a": a}),
            ModelSpec::Riema3 { b, kappa } => {
                serde_json::json!({"family": "riema3", "b": b, "kappa": kappa})
            }
            ModelSpec::Spiral { f, c } => {
                serde_json::json!({"family": "spiral", "f": f.to_string(), "c": c})
            }
            ModelSpec::SpiralHomogenized { f, c } => {
                serde_json::json!({"family": "spiral-homogenized", "f": f.to_string(), "c": c})
            }
            ModelSpec::Homogenized { base, s } => {
                serde_json::json!({"family": "homogenized", "s": s, "base": base.describe()})
            }
            ModelSpec::Custom(c) => serde_json::json!({"family": "custom", "name": c.name, "n": c.n}),
        }
    }
}

/// Result of [`ModelSpec::check_homogeneity`].
#[derive(Debug, Clone, Serialize)]
pub struct HomogeneityReport {
    pub max_deviation: f64,
    pub tol: f64,
    pub pass: bool,
    pub samples: usize,
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let norm = v.norm();
        if norm > 0.1 {
            return v / norm;
        }
    }
}

/// `(p_r, p_θ) = (x̂·ξ, x̂⊥·ξ)` for `n = 2`.
fn radial_momenta(x: &DVector<f64>, xi: &DVector<f64>) -> (f64, f64) {
    let r = x.norm();
    let xh = (x[0] / r, x[1] / r);
    (xh.0 * xi[0] + xh.1 * xi[1], -xh.1 * xi[0] + xh.0 * xi[1])
}

fn morse_potential_value(
    potential: &MorsePotential,
    regularize: &Option<SmoothStep>,
    x: &DVector<f64>,
) -> Result<f64> {
    let r = x.norm();
    if let Some(step) = regularize {
        if r <= step.lower {
            return Ok(0.0);
        }
        let v = raw_sphere_potential(potential, x)?;
        return Ok(step.value(r) * v);
    }
    if r == 0.0 {
        return Err(Error::EvaluationAtSingularity(
            "sphere potential at x = 0 with regularization disabled".into(),
        ));
    }
    raw_sphere_potential(potential, x)
}

fn raw_sphere_potential(potential: &MorsePotential, x: &DVector<f64>) -> Result<f64> {
    match potential {
        MorsePotential::Trig(v) => Ok(v.value(x[1].atan2(x[0]))),
        MorsePotential::CriticalPoint { omega, q, v0, frame } => {
            let xn = x.dot(omega);
            if xn <= 0.0 {
                return Err(Error::EvaluationAtSingularity(
                    "critical-point chart requires x·omega > 0".into(),
                ));
            }
            let mut acc = *v0;
            for (qj, ej) in q.iter().zip(frame) {
                let s = x.dot(ej) / xn;
                acc += 0.5 * qj * s * s;
            }
            Ok(acc)
        }
    }
}

fn morse_potential_grad(
    potential: &MorsePotential,
    regularize: &Option<SmoothStep>,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = x.len();
    let r = x.norm();
    if let Some(step) = regularize {
        if r <= step.lower {
            return Ok(DVector::zeros(n));
        }
        let v = raw_sphere_potential(potential, x)?;
        let gv = raw_sphere_potential_grad(potential, x)?;
        let xh = x / r;
        return Ok(xh * (step.deriv(r) * v) + gv * step.value(r));
    }
    if r == 0.0 {
        return Err(Error::EvaluationAtSingularity(
            "sphere potential at x = 0 with regularization disabled".into(),
        ));
    }
    raw_sphere_potential_grad(potential, x)
}

fn raw_sphere_potential_grad(potential: &MorsePotential, x: &DVector<f64>) -> Result<DVector<f64>> {
    match potential {
        MorsePotential::Trig(v) => {
            let r2 = x.norm_squared();
            let theta = x[1].atan2(x[0]);
            let dv = v.d1(theta);
            Ok(DVector::from_vec(vec![-dv * x[1] / r2, dv * x[0] / r2]))
        }
        MorsePotential::CriticalPoint { omega, q, v0: _, frame } => {
            let xn = x.dot(omega);
            if xn <= 0.0 {
                return Err(Error::EvaluationAtSingularity(
                    "critical-point chart requires x·omega > 0".into(),
                ));
            }
            let mut acc = DVector::zeros(x.len());
            for (qj, ej) in q.iter().zip(frame) {
                let s = x.dot(ej) / xn;
                acc += (ej - omega * s) * (qj * s / xn);
            }
            Ok(acc)
        }
    }
}

/// The argument `(x̂, ξ + (s⁻¹−1)⟨x̂,ξ⟩x̂)` of the homogenization transform.
fn homogenized_point(p: &PhasePoint, s: f64) -> Result<PhasePoint> {
    let r = p.x.norm();
    if r == 0.0 {
        return Err(Error::EvaluationAtSingularity("homogenized model at x = 0".into()));
    }
    let xh = &p.x / r;
    let c1 = 1.0 / s - 1.0;
    let m = xh.dot(&p.xi);
    Ok(PhasePoint::new(xh.clone(), &p.xi + xh * (c1 * m)))
}

fn homogenized_grad_chain(
    base: &ModelSpec,
    s: f64,
    p: &PhasePoint,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let r = p.x.norm();
    if r == 0.0 {
        return Err(Error::EvaluationAtSingularity("homogenized model at x = 0".into()));
    }
    let xh = &p.x / r;
    let c1 = 1.0 / s - 1.0;
    let m = xh.dot(&p.xi);
    let q = PhasePoint::new(xh.clone(), &p.xi + &xh * (c1 * m));
    let (gx, gxi) = base.grad(&q)?;
    // Projector (I − x̂x̂ᵀ) applied to a vector.
    let proj = |v: &DVector<f64>| v - &xh * xh.dot(v);
    let grad_m = proj(&p.xi) / r;
    let new_gxi = &gxi + &xh * (c1 * xh.dot(&gxi));
    let new_gx = proj(&gx) / r + &grad_m * (c1 * xh.dot(&gxi)) + proj(&gxi) * (c1 * m / r);
    Ok((new_gx, new_gxi))
}

/// Flat config mirror of a model spec (the `model.*` key set of the CLI
/// config format).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub regularize: Option<bool>,
    /// Trigonometric polynomial: `V(θ)` for `morse`, `f(θ)` for the spirals.
    #[serde(default)]
    pub trig_coeffs: Option<String>,
    /// Critical-point direction for `morse` with `n ≥ 3`.
    #[serde(default)]
    pub omega: Option<Vec<f64>>,
    /// Critical-point Hessian eigenvalues for `morse` with `n ≥ 3`.
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    /// Potential value at the critical point.
    #[serde(default)]
    pub v0: Option<f64>,
}

/// Build a model from its config mirror.
pub fn model_from_config(cfg: &ModelConfig) -> Result<ModelSpec> {
    let get = |key: &str| -> Result<f64> {
        cfg.params
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("missing model parameter '{key}'")))
    };
    match cfg.family.as_str() {
        "metric11" => ModelSpec::metric_example11(get("a")?),
        "morse" => {
            let regularize = cfg.regularize.unwrap_or(true);
            if let Some(omega) = &cfg.omega {
                let q = cfg.q.clone().ok_or_else(|| {
                    Error::InvalidInput("morse critical-point data requires q".into())
                })?;
                ModelSpec::morse_critical(
                    DVector::from_vec(omega.clone()),
                    q,
                    cfg.v0.unwrap_or(0.0),
                    regularize,
                )
            } else {
                let coeffs = cfg.trig_coeffs.as_deref().ok_or_else(|| {
                    Error::InvalidInput("morse with n = 2 requires trig_coeffs".into())
                })?;
                Ok(ModelSpec::morse_trig(coeffs.parse()?, regularize))
            }
        }
        "riema2" => ModelSpec::riema2(get("a")?),
        "riema3" => ModelSpec::riema3(get("b")?, get("kappa")?),
        "spiral" | "spiral-homogenized" => {
            let coeffs = cfg
                .trig_coeffs
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("spiral requires trig_coeffs".into()))?;
            let f: TrigPoly = coeffs.parse()?;
            let c = get("c")?;
            if cfg.family == "spiral" {
                ModelSpec::spiral(f, c)
            } else {
                ModelSpec::spiral_homogenized(f, c)
            }
        }
        other => Err(Error::InvalidInput(format!("unknown model family '{other}'"))),
    }
}
