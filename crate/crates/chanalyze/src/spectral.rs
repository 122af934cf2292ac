//! Spectral analysis of the reduced-flow linearization `B`.
//!
//! Provides the sorted eigendecomposition (stable block first), the
//! `λ ↦ −1−λ` pairing check satisfied by every channel linearization,
//! eigenbranch tracking along parameter grids, resonance detection
//! `⟨α, β⟩ = β_target` over multi-indices, and the jet order `m₀` required
//! by the decay analysis.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::Ratio;
use serde::Serialize;

use crate::par;
use crate::{Error, Result};

/// Relative threshold under which eigenvalues are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-7;

/// Default hyperbolicity tolerance on `|Re λ|`.
pub const HYPERBOLICITY_TOL: f64 = 1e-8;

/// Eigendecomposition of a real matrix, stable eigenvalues first.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Stable eigenvalues (`Re < 0`), ascending by real part.
    pub beta_s: Vec<Complex64>,
    /// Unstable eigenvalues (`Re > 0`), ascending by real part.
    pub beta_u: Vec<Complex64>,
    /// Eigenvector matrix: columns follow `beta_s` then `beta_u`, so the
    /// original coordinates are `w = T γ`.
    pub t: DMatrix<Complex64>,
    /// Inverse of `t` (`γ = T⁻¹ w`).
    pub t_inv: DMatrix<Complex64>,
    pub warnings: Vec<String>,
}

impl Spectrum {
    /// All eigenvalues in column order of `t`.
    pub fn all(&self) -> Vec<Complex64> {
        self.beta_s.iter().chain(self.beta_u.iter()).copied().collect()
    }

    /// Tracked stable rate `β₁ˢ` (first stable eigenvalue).
    pub fn beta1s(&self) -> Result<Complex64> {
        self.beta_s.first().copied().ok_or(Error::NoStableDirections)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pair = |v: &Vec<Complex64>| -> Vec<[f64; 2]> { v.iter().map(|z| [z.re, z.im]).collect() };
        serde_json::json!({
            "beta_stable": pair(&self.beta_s),
            "beta_unstable": pair(&self.beta_u),
            "warnings": self.warnings,
        })
    }
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(Complex64::from)
}

/// All eigenvalues of a real matrix via a complex Schur decomposition with a
/// bounded iteration count. The convenience eigenvalue routines run the QR
/// iteration without a cap and can spin forever on matrices whose shifted
/// iteration cycles; capping it turns that failure mode into an error.
pub fn bounded_eigenvalues(b: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = b.nrows();
    assert_eq!(n, b.ncols(), "square matrix required");
    if n == 0 {
        return Ok(Vec::new());
    }
    // ~40 iterations per eigenvalue is the classical budget; give 10x slack.
    let max_niter = 400 * n;
    let schur = nalgebra::linalg::Schur::try_new(complexify(b), f64::EPSILON, max_niter)
        .ok_or_else(|| {
            Error::DefectiveBeyondTolerance(format!(
                "eigenvalue QR iteration did not converge within {max_niter} steps"
            ))
        })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Eigenvalue/eigenvector pairs of a real matrix, via the complex Schur
/// spectrum, clustered nullspace extraction, and inverse-iteration
/// refinement. Errors with [`Error::DefectiveBeyondTolerance`] when a
/// repeated eigenvalue has too small an eigenspace.
pub fn eigenpairs(b: &DMatrix<f64>) -> Result<Vec<(Complex64, DVector<Complex64>)>> {
    let n = b.nrows();
    assert_eq!(n, b.ncols(), "square matrix required");
    let scale = b.norm().max(1.0);
    let mut eigs: Vec<Complex64> = bounded_eigenvalues(b)?;
    eigs.sort_by(|a, c| a.re.total_cmp(&c.re).then(a.im.total_cmp(&c.im)));
    // Cluster eigenvalues closer than CLUSTER_TOL·scale.
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for lam in eigs {
        match clusters.last_mut() {
            Some(cl) if (lam - cl[cl.len() - 1]).norm() < CLUSTER_TOL * scale => cl.push(lam),
            _ => clusters.push(vec![lam]),
        }
    }
    let bc = complexify(b);
    let mut out: Vec<(Complex64, DVector<Complex64>)> = Vec::new();
    for cl in clusters {
        let mean = cl.iter().sum::<Complex64>() / cl.len() as f64;
        let shifted = &bc - DMatrix::from_diagonal_element(n, n, mean);
        let svd = shifted.clone().svd(true, true);
        let mut sv: Vec<(f64, usize)> =
            svd.singular_values.iter().copied().zip(0..n).collect();
        sv.sort_by(|a, c| a.0.total_cmp(&c.0));
        if cl.len() == 1 {
            let lam = cl[0];
            let v_t = svd.v_t.as_ref().expect("svd with v_t");
            let mut v: DVector<Complex64> = v_t.row(sv[0].1).transpose().map(|z| z.conj());
            // Two rounds of inverse iteration against a slightly shifted
            // matrix sharpen the vector without risking an exact singularity.
            let eps = Complex64::new(1e-11 * scale, 1e-11 * scale);
            let iter_m = &bc - DMatrix::from_diagonal_element(n, n, lam + eps);
            if let Some(lu_solve) = iter_m.lu().try_inverse() {
                for _ in 0..2 {
                    let w = &lu_solve * &v;
                    let norm = w.norm();
                    if !norm.is_finite() || norm == 0.0 {
                        break;
                    }
                    v = w / Complex64::from(norm);
                }
            }
            // Rayleigh-quotient polish of the eigenvalue.
            let bv = &bc * &v;
            let vv = v.dotc(&v);
            let lam = v.dotc(&bv) / vv;
            out.push((lam, v));
        } else {
            // Repeated eigenvalue: require a full eigenspace.
            let r = cl.len();
            let null_dim = sv.iter().filter(|(s, _)| *s < 1e-7 * scale).count();
            if null_dim < r {
                return Err(Error::DefectiveBeyondTolerance(format!(
                    "eigenvalue {mean} has multiplicity {r} but eigenspace dimension {null_dim}"
                )));
            }
            let v_t = svd.v_t.as_ref().expect("svd with v_t");
            for &(_, row) in sv.iter().take(r) {
                let v: DVector<Complex64> = v_t.row(row).transpose().map(|z| z.conj());
                out.push((mean, v));
            }
        }
    }
    Ok(out)
}

/// Certified eigendecomposition sorted stable-block-first.
///
/// Errors: [`Error::HyperbolicityViolated`] if any `|Re λ| ≤ hyp_tol`,
/// [`Error::DefectiveBeyondTolerance`] from [`eigenpairs`].
pub fn decompose(b: &DMatrix<f64>, hyp_tol: f64) -> Result<Spectrum> {
    let n = b.nrows();
    let pairs = eigenpairs(b)?;
    for (lam, _) in &pairs {
        if lam.re.abs() <= hyp_tol {
            return Err(Error::HyperbolicityViolated { eigenvalue: *lam, tol: hyp_tol });
        }
    }
    let mut stable: Vec<(Complex64, DVector<Complex64>)> = Vec::new();
    let mut unstable: Vec<(Complex64, DVector<Complex64>)> = Vec::new();
    for p in pairs {
        if p.0.re < 0.0 {
            stable.push(p);
        } else {
            unstable.push(p);
        }
    }
    let key = |a: &(Complex64, DVector<Complex64>)| (a.0.re, a.0.im);
    stable.sort_by(|a, c| {
        let (ar, ai) = key(a);
        let (cr, ci) = key(c);
        ar.total_cmp(&cr).then(ai.total_cmp(&ci))
    });
    unstable.sort_by(|a, c| {
        let (ar, ai) = key(a);
        let (cr, ci) = key(c);
        ar.total_cmp(&cr).then(ai.total_cmp(&ci))
    });
    let mut t = DMatrix::<Complex64>::zeros(n, n);
    let mut beta_s = Vec::new();
    let mut beta_u = Vec::new();
    for (j, (lam, v)) in stable.iter().chain(unstable.iter()).enumerate() {
        t.set_column(j, v);
        if j < stable.len() {
            beta_s.push(*lam);
        } else {
            beta_u.push(*lam);
        }
    }
    let mut warnings = Vec::new();
    let svd = t.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > 1e10 {
        warnings.push(format!("ill-conditioned eigenbasis: cond(T) = {:.3e}", smax / smin));
    }
    let t_inv = t.clone().try_inverse().ok_or_else(|| {
        Error::DefectiveBeyondTolerance("eigenvector matrix is numerically singular".into())
    })?;
    if let Some(b1) = beta_s.first() {
        if b1.re >= -1.0 {
            warnings.push(format!(
                "slow stable rate: Re β₁ˢ = {:.6} ≥ −1; decay-vs-growth separation is weak",
                b1.re
            ));
        }
    }
    Ok(Spectrum { beta_s, beta_u, t, t_inv, warnings })
}

/// Pairing check: the spectrum of a channel linearization is invariant
/// under `λ ↦ −1−λ`.
#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    pub max_mismatch: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn check_pairing(betas: &[Complex64], tol: f64) -> PairingReport {
    let mut max_mismatch: f64 = 0.0;
    for lam in betas {
        let image = Complex64::new(-1.0, 0.0) - lam;
        let d = betas.iter().map(|m| (m - image).norm()).fold(f64::INFINITY, f64::min);
        max_mismatch = max_mismatch.max(d);
    }
    PairingReport { max_mismatch, tol, pass: max_mismatch <= tol }
}

/// One eigenbranch followed along a matrix family.
#[derive(Debug, Clone)]
pub struct TrackedBranch {
    pub eigenvalues: Vec<Complex64>,
    pub vectors: Vec<DVector<Complex64>>,
}

/// Follow the eigenbranch of `mats[0]` starting at position `start` of the
/// sorted spectrum (stable ascending, then unstable ascending), matching by
/// eigenvector overlap at each step.
///
/// Errors: [`Error::EigenvalueCollision`] when the matched eigenvalue comes
/// within `gap_tol` of a different branch (ambiguous continuation).
pub fn track_eigenvector(
    mats: &[DMatrix<f64>],
    start: usize,
    gap_tol: f64,
) -> Result<TrackedBranch> {
    if mats.is_empty() {
        return Err(Error::InvalidInput("empty matrix family".into()));
    }
    let sorted_pairs = |b: &DMatrix<f64>| -> Result<Vec<(Complex64, DVector<Complex64>)>> {
        let mut p = eigenpairs(b)?;
        p.sort_by(|a, c| {
            let sa = a.0.re >= 0.0;
            let sc = c.0.re >= 0.0;
            sa.cmp(&sc).then(a.0.re.total_cmp(&c.0.re)).then(a.0.im.total_cmp(&c.0.im))
        });
        Ok(p)
    };
    let first = sorted_pairs(&mats[0])?;
    if start >= first.len() {
        return Err(Error::InvalidInput(format!(
            "branch index {start} out of range for {} eigenvalues",
            first.len()
        )));
    }
    let mut eigenvalues = vec![first[start].0];
    let mut vectors = vec![first[start].1.clone()];
    for (step, m) in mats.iter().enumerate().skip(1) {
        let pairs = eigenpairs(m)?;
        let prev = &vectors[vectors.len() - 1];
        let mut best: Option<(f64, usize)> = None;
        for (j, (_, v)) in pairs.iter().enumerate() {
            let overlap = prev.dotc(v).norm() / (prev.norm() * v.norm());
            if best.map_or(true, |(o, _)| overlap > o) {
                best = Some((overlap, j));
            }
        }
        let (_, jbest) = best.expect("non-empty spectrum");
        let lam = pairs[jbest].0;
        let gap = pairs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != jbest)
            .map(|(_, (l, _))| (l - lam).norm())
            .fold(f64::INFINITY, f64::min);
        if gap < gap_tol {
            return Err(Error::EigenvalueCollision { index: step, gap });
        }
        eigenvalues.push(lam);
        vectors.push(pairs[jbest].1.clone());
    }
    Ok(TrackedBranch { eigenvalues, vectors })
}

/// A resonance relation `⟨α, β⟩ = β_target`.
#[derive(Debug, Clone, Serialize)]
pub struct Resonance {
    pub alpha: Vec<u32>,
    /// Index into the eigenvalue list of the matched target.
    pub target: usize,
    /// `|⟨α, β⟩ − β_target|`.
    pub residual: f64,
}

impl Resonance {
    pub fn order(&self) -> u32 {
        self.alpha.iter().sum()
    }
}

/// Depth-first enumeration of `⟨α, β⟩ ≈ β_j` over `2 ≤ |α| ≤ m_max`, with
/// interval pruning on the attainable real and imaginary parts.
///
/// Errors: [`Error::CombinatorialBudgetExceeded`] when more than `budget`
/// nodes are visited.
pub fn detect_resonances(
    beta: &[Complex64],
    m_max: u32,
    tol: f64,
    budget: usize,
) -> Result<Vec<Resonance>> {
    let d = beta.len();
    if d == 0 {
        return Ok(vec![]);
    }
    let re: Vec<f64> = beta.iter().map(|z| z.re).collect();
    let im: Vec<f64> = beta.iter().map(|z| z.im).collect();
    // Per-step attainable ranges for pruning: one unit of any remaining
    // variable moves the sum by some β_i with i ≥ current position.
    let mut re_min_suffix = vec![f64::INFINITY; d + 1];
    let mut re_max_suffix = vec![f64::NEG_INFINITY; d + 1];
    let mut im_min_suffix = vec![f64::INFINITY; d + 1];
    let mut im_max_suffix = vec![f64::NEG_INFINITY; d + 1];
    for i in (0..d).rev() {
        re_min_suffix[i] = re_min_suffix[i + 1].min(re[i]);
        re_max_suffix[i] = re_max_suffix[i + 1].max(re[i]);
        im_min_suffix[i] = im_min_suffix[i + 1].min(im[i]);
        im_max_suffix[i] = im_max_suffix[i + 1].max(im[i]);
    }
    let mut hits = Vec::new();
    let mut visited = 0usize;
    let mut alpha = vec![0u32; d];

    // Iterative DFS over positions; at each position choose the exponent.
    fn dfs(
        pos: usize,
        degree_left: u32,
        sum: Complex64,
        alpha: &mut Vec<u32>,
        beta: &[Complex64],
        suffix: (&[f64], &[f64], &[f64], &[f64]),
        tol: f64,
        budget: usize,
        visited: &mut usize,
        hits: &mut Vec<Resonance>,
    ) -> Result<()> {
        let d = beta.len();
        *visited += 1;
        if *visited > budget {
            return Err(Error::CombinatorialBudgetExceeded { candidates: *visited, cap: budget });
        }
        if pos == d {
            let order: u32 = alpha.iter().sum();
            if order >= 2 {
                for (j, bj) in beta.iter().enumerate() {
                    let r = (sum - bj).norm();
                    if r <= tol {
                        hits.push(Resonance { alpha: alpha.clone(), target: j, residual: r });
                    }
                }
            }
            return Ok(());
        }
        let (re_min, re_max, im_min, im_max) = suffix;
        for e in 0..=degree_left {
            alpha[pos] = e;
            let s = sum + beta[pos] * e as f64;
            let left = degree_left - e;
            // Remaining degree can move the sum within these bounds.
            let lo_re = s.re + if left > 0 { re_min[pos + 1].min(0.0) * left as f64 } else { 0.0 };
            let hi_re = s.re + if left > 0 { re_max[pos + 1].max(0.0) * left as f64 } else { 0.0 };
            let lo_im = s.im + if left > 0 { im_min[pos + 1].min(0.0) * left as f64 } else { 0.0 };
            let hi_im = s.im + if left > 0 { im_max[pos + 1].max(0.0) * left as f64 } else { 0.0 };
            let reachable = beta.iter().any(|bj| {
                bj.re >= lo_re - tol
                    && bj.re <= hi_re + tol
                    && bj.im >= lo_im - tol
                    && bj.im <= hi_im + tol
            });
            if reachable {
                dfs(pos + 1, left, s, alpha, beta, suffix, tol, budget, visited, hits)?;
            }
        }
        alpha[pos] = 0;
        Ok(())
    }

    dfs(
        0,
        m_max,
        Complex64::new(0.0, 0.0),
        &mut alpha,
        beta,
        (&re_min_suffix, &re_max_suffix, &im_min_suffix, &im_max_suffix),
        tol,
        budget,
        &mut visited,
        &mut hits,
    )?;
    hits.sort_by(|a, b| a.order().cmp(&b.order()).then(a.alpha.cmp(&b.alpha)));
    Ok(hits)
}

/// Exact resonance detection for rational real spectra.
pub fn detect_resonances_exact(
    beta: &[Ratio<i64>],
    m_max: u32,
    budget: usize,
) -> Result<Vec<Resonance>> {
    let d = beta.len();
    let mut hits = Vec::new();
    let mut visited = 0usize;
    let mut alpha = vec![0u32; d];
    fn dfs(
        pos: usize,
        degree_left: u32,
        sum: Ratio<i64>,
        alpha: &mut Vec<u32>,
        beta: &[Ratio<i64>],
        budget: usize,
        visited: &mut usize,
        hits: &mut Vec<Resonance>,
    ) -> Result<()> {
        *visited += 1;
        if *visited > budget {
            return Err(Error::CombinatorialBudgetExceeded { candidates: *visited, cap: budget });
        }
        if pos == beta.len() {
            let order: u32 = alpha.iter().sum();
            if order >= 2 {
                for (j, bj) in beta.iter().enumerate() {
                    if sum == *bj {
                        hits.push(Resonance { alpha: alpha.clone(), target: j, residual: 0.0 });
                    }
                }
            }
            return Ok(());
        }
        for e in 0..=degree_left {
            alpha[pos] = e;
            let s = sum + *beta.get(pos).unwrap() * Ratio::from_integer(e as i64);
            dfs(pos + 1, degree_left - e, s, alpha, beta, budget, visited, hits)?;
        }
        alpha[pos] = 0;
        Ok(())
    }
    dfs(0, m_max, Ratio::from_integer(0), &mut alpha, beta, budget, &mut visited, &mut hits)?;
    hits.sort_by(|a, b| a.order().cmp(&b.order()).then(a.alpha.cmp(&b.alpha)));
    Ok(hits)
}

/// Resonance hits for one grid value.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceRow {
    pub grid_value: f64,
    pub hits: Vec<Resonance>,
}

/// Scan result with resonance-free windows of the grid.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceScan {
    pub rows: Vec<ResonanceRow>,
    /// Maximal contiguous grid intervals `[lo, hi]` with no hit.
    pub windows: Vec<(f64, f64)>,
}

/// Run [`detect_resonances`] over `(grid_value, spectrum)` pairs
/// (data-parallel when the `parallel` feature is active).
pub fn scan_resonances(
    values: &[(f64, Vec<Complex64>)],
    m_max: u32,
    tol: f64,
    budget: usize,
) -> Result<ResonanceScan> {
    let results = par::map(values, |(v, beta)| {
        detect_resonances(beta, m_max, tol, budget).map(|hits| ResonanceRow { grid_value: *v, hits })
    });
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }
    let mut windows = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for row in &rows {
        if row.hits.is_empty() {
            open = match open {
                None => Some((row.grid_value, row.grid_value)),
                Some((lo, _)) => Some((lo, row.grid_value)),
            };
        } else if let Some(w) = open.take() {
            windows.push(w);
        }
    }
    if let Some(w) = open {
        windows.push(w);
    }
    Ok(ResonanceScan { rows, windows })
}

/// Smallest admissible expansion order for the decay analysis: the least
/// integer strictly greater than `max(4, max_j (1 + Re β_jˢ)/(−Re β_jˢ))`.
///
/// Errors: [`Error::NoStableDirections`] for an empty stable block.
pub fn compute_m0(beta_s: &[Complex64]) -> Result<usize> {
    if beta_s.is_empty() {
        return Err(Error::NoStableDirections);
    }
    let mut v = 4.0f64;
    for b in beta_s {
        if b.re >= 0.0 {
            return Err(Error::InvalidInput(format!(
                "non-stable rate {b} passed to compute_m0"
            )));
        }
        v = v.max((1.0 + b.re) / (-b.re));
    }
    Ok((v + 1e-9).floor() as usize + 1)
}
