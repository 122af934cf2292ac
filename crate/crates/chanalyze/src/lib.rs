//! Numerical toolkit for classical Hamiltonian channels at spatial infinity.
//!
//! A *channel* is a family of orbits escaping along a fixed direction: for each
//! energy `E` a unit vector `ω(E)`, an asymptotic momentum `ξ(E)` and a speed
//! `k(E)` solving
//!
//! ```text
//! h(ω, ξ) = E,   ∇_x h(ω, ξ) = 0,   ∇_ξ h(ω, ξ) = k ω,   |ω| = 1.
//! ```
//!
//! In adapted coordinates transverse to the channel the flow becomes an
//! autonomous system in `w = (u, η)` with logarithmic time `τ = ln x_n`, and
//! the toolkit provides, layer by layer:
//!
//! - [`model`] — built-in Hamiltonian families (degree-zero metrics, sphere
//!   potentials, two-parameter homogeneous metrics, logarithmic spirals),
//!   gradients/Hessians, homogeneity checks and smooth regularization;
//! - [`reduction`] — channel solves, orthonormal frames, the implicit solve
//!   `μ = -g(u, η, E)`, numeric Taylor jets of `g`, and the linearization
//!   `B(E)` of the reduced flow;
//! - [`spectral`] — eigen-decomposition and stable/unstable classification of
//!   `B(E)`, eigenvector tracking along grids, resonance detection among the
//!   eigenvalues, and the normal-form order bound `m₀`;
//! - [`normalform`] — truncated polynomial algebra in the diagonalizing
//!   coordinates `γ = T⁻¹w` and the Poincaré recursion producing the scalar
//!   observable `Γ` whose `τ`-derivative is `β₁ˢ Γ` up to high order;
//! - [`dynamics`] — full and reduced flow integration, the observables
//!   `qˢ, qᵘ, q±`, power-law exponent fits, stable-manifold shooting and the
//!   asymptotic clock check `t·∂_μh/x_n → 1`;
//! - [`geometry`] — conformal scaling fields (`L_v ω_sympl = α ω_sympl`),
//!   commutator identities, flow conformal factors, two-parameter
//!   homogenization and the spiral geodesic analysis.
//!
//! Everything is pure and immutable after construction; grid sweeps
//! parallelize with `rayon` when the `parallel` feature (default) is enabled
//! and fall back to sequential maps otherwise.

pub mod dynamics;
mod fd;
pub mod geometry;
pub mod model;
pub mod normalform;
pub mod par;
pub mod reduction;
pub mod spectral;

use thiserror::Error;

/// Unified error type for all toolkit operations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Model evaluated at `x = 0` (or another excluded set) with
    /// regularization disabled.
    #[error("evaluation at singular point: {0}")]
    EvaluationAtSingularity(String),
    /// Newton iteration for the channel equations exceeded its iteration cap
    /// or the residual grew uncontrollably.
    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),
    /// A channel solution violates the transversality condition `k > 0`.
    #[error("channel point not transversal: k = {k:.3e} <= 0")]
    NonTransversal { k: f64 },
    /// Continuation lost the solution branch; `last_good` is the last energy
    /// where the channel equations were solved successfully.
    #[error("channel branch lost during continuation; last good energy {last_good}")]
    BranchLost { last_good: f64 },
    /// The 1-D implicit solve for `μ` failed to converge.
    #[error("implicit solve for mu failed: {0}")]
    ImplicitSolveFailed(String),
    /// Richardson levels of the finite-difference jet disagree beyond
    /// tolerance; the requested Taylor order is not trustworthy.
    #[error("taylor jet ill-conditioned: {0}")]
    JetIllConditioned(String),
    /// An eigenvalue real part falls below the hyperbolicity tolerance.
    #[error("hyperbolicity violated: eigenvalue {eigenvalue} has |Re| < {tol:.1e}")]
    HyperbolicityViolated { eigenvalue: num_complex::Complex64, tol: f64 },
    /// The Jordan structure of `B` could not be stabilized numerically.
    #[error("defective eigenvalue cluster beyond tolerance: {0}")]
    DefectiveBeyondTolerance(String),
    /// Two eigenvalue branches approached within tolerance while tracking.
    #[error("eigenvalue collision at grid index {index}: gap {gap:.3e}")]
    EigenvalueCollision { index: usize, gap: f64 },
    /// Resonance candidate enumeration exceeded the configured budget.
    #[error("combinatorial budget exceeded: {candidates} candidates > cap {cap}")]
    CombinatorialBudgetExceeded { candidates: usize, cap: usize },
    /// The spectrum has no stable directions, so `m₀` is undefined.
    #[error("no stable directions in spectrum")]
    NoStableDirections,
    /// The homological system is singular: an eigenvalue relation
    /// `β_j = β·α` holds at this order.
    #[error("resonance detected at order {order}: smallest singular value {sigma_min:.3e}")]
    ResonanceDetected { order: usize, sigma_min: f64 },
    /// Energy drift along a trajectory exceeded the integration budget.
    #[error("energy drift {drift:.3e} exceeded budget {budget:.3e}")]
    EnergyBudgetExceeded { drift: f64, budget: f64 },
    /// The adaptive integrator step shrank below representable size.
    #[error("integrator step underflow at t = {t}")]
    StepUnderflow { t: f64 },
    /// A reduced-coordinate state left the validity chart.
    #[error("trajectory left the coordinate chart at {at}: |w| = {norm:.3}")]
    ChartExit { at: f64, norm: f64 },
    /// Too few samples to perform a least-squares exponent fit.
    #[error("insufficient samples for fit: {found} < {required}")]
    InsufficientSamples { found: usize, required: usize },
    /// The shooting bracket was lost during stable-manifold refinement.
    #[error("stable-manifold refinement failed: {0}")]
    RefinementFailed(String),
    /// The model does not satisfy the scaling law required by the
    /// homogenization transform.
    #[error("homogeneity precondition failed: {0}")]
    HomogeneityPreconditionFailed(String),
    /// The spiral fixed-point equation has no roots for these parameters.
    #[error("no spiral roots: {0}")]
    NoRoots(String),
    /// Invalid argument or model parameter.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the error variant (used by the CLI
    /// for JSON error reports).
    pub fn name(&self) -> &'static str {
        match self {
            Error::EvaluationAtSingularity(_) => "EvaluationAtSingularity",
            Error::NewtonDiverged(_) => "NewtonDiverged",
            Error::NonTransversal { .. } => "NonTransversal",
            Error::BranchLost { .. } => "BranchLost",
            Error::ImplicitSolveFailed(_) => "ImplicitSolveFailed",
            Error::JetIllConditioned(_) => "JetIllConditioned",
            Error::HyperbolicityViolated { .. } => "HyperbolicityViolated",
            Error::DefectiveBeyondTolerance(_) => "DefectiveBeyondTolerance",
            Error::EigenvalueCollision { .. } => "EigenvalueCollision",
            Error::CombinatorialBudgetExceeded { .. } => "CombinatorialBudgetExceeded",
            Error::NoStableDirections => "NoStableDirections",
            Error::ResonanceDetected { .. } => "ResonanceDetected",
            Error::EnergyBudgetExceeded { .. } => "EnergyBudgetExceeded",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::ChartExit { .. } => "ChartExit",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::RefinementFailed(_) => "RefinementFailed",
            Error::HomogeneityPreconditionFailed(_) => "HomogeneityPreconditionFailed",
            Error::NoRoots(_) => "NoRoots",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
