//! Subcommand implementations.

pub mod analyze;
pub mod geometry;
pub mod normalform;
pub mod resonances;
pub mod simulate;

use std::path::PathBuf;

use nalgebra::DVector;

use chanalyze::model::ModelSpec;
use chanalyze::reduction::{ChannelGuess, LocalModel};
use chanalyze::spectral::Spectrum;
use chanalyze::{Error, Result};

/// Cross-command run context resolved from global flags and the config.
pub struct Ctx {
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub progress: bool,
}

/// Solve the channel from a direction guess and expand the reduced
/// Hamiltonian to `order`. `direction` defaults to the first coordinate
/// axis, which is a channel direction for every rotation-symmetric family
/// and a serviceable Newton seed elsewhere.
pub fn build_local(
    model: &ModelSpec,
    energy: f64,
    direction: Option<&[f64]>,
    order: usize,
) -> Result<LocalModel> {
    let n = model.dim();
    let omega = match direction {
        Some(d) => {
            if d.len() != n {
                return Err(Error::InvalidInput(format!(
                    "--direction has {} components but the model lives in dimension {n}",
                    d.len()
                )));
            }
            let v = DVector::from_row_slice(d);
            if v.norm() < 1e-12 {
                return Err(Error::InvalidInput("--direction must be a nonzero vector".into()));
            }
            v
        }
        None => DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }),
    };
    let guess = ChannelGuess::from_direction(model, energy, omega);
    LocalModel::build(model, energy, &guess, order)
}

/// Stability class of the channel fixed point from the split spectrum.
pub fn classification(spectrum: &Spectrum) -> &'static str {
    match (spectrum.beta_s.is_empty(), spectrum.beta_u.is_empty()) {
        (false, false) => "saddle",
        (false, true) => "stable",
        (true, false) => "unstable",
        (true, true) => "degenerate",
    }
}
