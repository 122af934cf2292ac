//! `chanalyze resonances` — resonance sweep over a parameter/energy grid.
//!
//! The channel is solved per grid point (sequentially — model closures are
//! not shared across threads), then the combinatorial resonance search runs
//! data-parallel over the collected spectra. Rows are reported in grid
//! order regardless of worker count.

use num_complex::Complex64;

use chanalyze::model::model_from_config;
use chanalyze::spectral::{self, scan_resonances, HYPERBOLICITY_TOL};
use chanalyze::Result;

use crate::commands::{build_local, Ctx};
use crate::config::{missing, FileConfig};
use crate::grid;
use crate::output::{self, Format};
use crate::ResonancesArgs;

const DEFAULT_MMAX: u32 = 12;
const DEFAULT_TOL: f64 = 1e-9;
const DEFAULT_BUDGET: usize = 50_000_000;

pub fn run(args: &ResonancesArgs, file: &FileConfig, ctx: &Ctx) -> Result<()> {
    let sec = file.resonances.as_ref();
    let grid_spec = args
        .grid
        .clone()
        .or_else(|| sec.and_then(|s| s.grid.clone()))
        .ok_or_else(|| missing("resonances", "grid"))?;
    let grid = grid::parse(&grid_spec)?;
    let mmax = args.mmax.or(sec.and_then(|s| s.mmax)).unwrap_or(DEFAULT_MMAX);
    let tol = args.tol.or(sec.and_then(|s| s.tol)).unwrap_or(DEFAULT_TOL);
    let budget = args.budget.or(sec.and_then(|s| s.budget)).unwrap_or(DEFAULT_BUDGET);
    let fixed_energy = args.energy.or(sec.and_then(|s| s.energy));
    let direction = args
        .model
        .direction
        .clone()
        .or_else(|| sec.and_then(|s| s.direction.clone()));
    let base_cfg = args.model.merge_into(file.model.as_ref())?;

    let mut spectra: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(grid.values.len());
    for (i, &value) in grid.values.iter().enumerate() {
        if ctx.progress {
            eprintln!(
                "resonances: channel {}/{} ({} = {value})",
                i + 1,
                grid.values.len(),
                grid.name
            );
        }
        let (model, energy) = if grid.name == "energy" {
            (model_from_config(&base_cfg)?, value)
        } else {
            let mut cfg = base_cfg.clone();
            cfg.params.insert(grid.name.clone(), value);
            let energy = fixed_energy.ok_or_else(|| missing("resonances", "energy"))?;
            (model_from_config(&cfg)?, energy)
        };
        let lm = build_local(&model, energy, direction.as_deref(), 2)?;
        let spectrum = spectral::decompose(&lm.b, HYPERBOLICITY_TOL)?;
        spectra.push((value, spectrum.all()));
    }

    let scan = scan_resonances(&spectra, mmax, tol, budget)?;

    match output::format_for(ctx.out.as_deref(), Format::Csv)? {
        Format::Csv => {
            // One row per grid point. `min_order`/`alpha`/`target`/`residual`
            // describe the lowest-order hit and stay empty when the point is
            // resonance-free; `target` indexes the eigenvalue list in
            // stable-then-unstable order.
            let header = ["grid_value", "min_order", "alpha", "target", "residual"];
            let rows: Vec<Vec<String>> = scan
                .rows
                .iter()
                .map(|row| match row.hits.first() {
                    None => vec![
                        output::fnum(row.grid_value),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ],
                    Some(hit) => vec![
                        output::fnum(row.grid_value),
                        hit.order().to_string(),
                        hit.alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";"),
                        hit.target.to_string(),
                        format!("{:e}", hit.residual),
                    ],
                })
                .collect();
            output::emit(ctx.out.as_deref(), &output::csv_table(&header, &rows))
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = scan
                .rows
                .iter()
                .zip(spectra.iter())
                .map(|(row, (_, beta))| {
                    serde_json::json!({
                        "grid_value": row.grid_value,
                        "eigenvalues": output::complex_pairs(beta),
                        "hits": row.hits.iter().map(|h| serde_json::json!({
                            "alpha": h.alpha,
                            "order": h.order(),
                            "target": h.target,
                            "residual": h.residual,
                        })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let report = serde_json::json!({
                "spec_version": crate::config::SPEC_VERSION,
                "command": "resonances",
                "model": base_cfg,
                "grid": { "name": grid.name, "values": grid.values },
                "energy": fixed_energy,
                "mmax": mmax,
                "tol": tol,
                "budget": budget,
                "rows": rows,
                "resonance_free_windows": scan.windows,
            });
            output::emit(ctx.out.as_deref(), &output::json_text(&report))
        }
    }
}
