//! `chanalyze analyze` — one channel, full local report.

use chanalyze::model::model_from_config;
use chanalyze::reduction::matrix_rows;
use chanalyze::spectral::{self, check_pairing, compute_m0, HYPERBOLICITY_TOL};
use chanalyze::Result;

use crate::commands::{build_local, classification, Ctx};
use crate::config::{missing, FileConfig};
use crate::output::{self, Format};
use crate::AnalyzeArgs;

/// The reduced-flow spectrum must be symmetric under λ ↦ −1 − λ; the report
/// asserts the pairing to this tolerance.
const PAIRING_TOL: f64 = 1e-8;

pub fn run(args: &AnalyzeArgs, file: &FileConfig, ctx: &Ctx) -> Result<()> {
    let sec = file.analyze.as_ref();
    let cfg = args.model.merge_into(file.model.as_ref())?;
    let model = model_from_config(&cfg)?;
    let energy = args
        .energy
        .or(sec.and_then(|s| s.energy))
        .ok_or_else(|| missing("analyze", "energy"))?;
    let order = args.order.or(sec.and_then(|s| s.order)).unwrap_or(2);
    let direction = args
        .model
        .direction
        .clone()
        .or_else(|| sec.and_then(|s| s.direction.clone()));

    let lm = build_local(&model, energy, direction.as_deref(), order)?;
    let spectrum = spectral::decompose(&lm.b, HYPERBOLICITY_TOL)?;
    let eigs = spectrum.all();
    let pairing = check_pairing(&eigs, PAIRING_TOL);
    // m0 only exists when there is a contracting block; report null otherwise.
    let m0 = compute_m0(&spectrum.beta_s).ok();

    let report = serde_json::json!({
        "spec_version": crate::config::SPEC_VERSION,
        "command": "analyze",
        "model": lm.model.describe(),
        "energy": energy,
        "channel": {
            "omega": lm.channel.omega.as_slice(),
            "xi": lm.channel.xi.as_slice(),
            "k": lm.channel.k,
            "residual": lm.channel.residual,
        },
        "hessian": matrix_rows(&lm.jet.hessian0()),
        "linearization": matrix_rows(&lm.b),
        "eigenvalues": output::complex_pairs(&eigs),
        "spectrum": spectrum.to_json(),
        "pairing": {
            "tol": PAIRING_TOL,
            "max_mismatch": pairing.max_mismatch,
            "pass": pairing.pass,
        },
        "classification": classification(&spectrum),
        "m0": m0,
        "expansion_order": order,
        "tolerances": {
            "hyperbolicity": HYPERBOLICITY_TOL,
            "channel_residual": chanalyze::reduction::CHANNEL_TOL,
        },
    });

    match output::format_for(ctx.out.as_deref(), Format::Json)? {
        Format::Json => output::emit(ctx.out.as_deref(), &output::json_text(&report)),
        Format::Csv => {
            // Flat eigenvalue table for spreadsheet use.
            let header = ["index", "re", "im", "block"];
            let n_s = spectrum.beta_s.len();
            let rows: Vec<Vec<String>> = eigs
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    vec![
                        i.to_string(),
                        output::fnum(z.re),
                        output::fnum(z.im),
                        if i < n_s { "stable".into() } else { "unstable".into() },
                    ]
                })
                .collect();
            output::emit(ctx.out.as_deref(), &output::csv_table(&header, &rows))
        }
    }
}
