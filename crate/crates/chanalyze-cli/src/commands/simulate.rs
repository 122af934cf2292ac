//! `chanalyze simulate` — full-flow orbit with channel observables.
//!
//! Output routing: the sample table (CSV, one row per accepted step inside
//! the chart) goes to `--out file.csv` or to stdout; the JSON fit report
//! (exponents, monotonicity audit, clock calibration) goes to stdout when
//! the table went to a file, to stderr when the table went to stdout, and
//! with `--out file.json` both land in the file together.

use nalgebra::DVector;

use chanalyze::dynamics::{
    self, burn_in_index, clock_check, fit_exponent, integrate_full, lift_to_full, observables,
    shoot_stable, OdeOptions,
};
use chanalyze::model::model_from_config;
use chanalyze::normalform::NormalForm;
use chanalyze::spectral::{self, Spectrum, HYPERBOLICITY_TOL};
use chanalyze::{Error, Result};

use crate::commands::{build_local, Ctx};
use crate::config::{missing, FileConfig};
use crate::output::{self, Format};
use crate::SimulateArgs;

const DEFAULT_T0: f64 = 1.0;
const DEFAULT_TMAX: f64 = 1e4;
const DEFAULT_AMPLITUDE: f64 = 0.02;

/// Columns of the observable table, in order.
const CSV_HEADER: [&str; 9] =
    ["t", "tau", "q_s", "q_u", "q_minus", "q_plus", "gamma_abs", "Gamma_abs", "clock"];

pub fn run(args: &SimulateArgs, file: &FileConfig, ctx: &Ctx) -> Result<()> {
    let sec = file.simulate.as_ref();
    let cfg = args.model.merge_into(file.model.as_ref())?;
    let model = model_from_config(&cfg)?;
    let energy = args
        .energy
        .or(sec.and_then(|s| s.energy))
        .ok_or_else(|| missing("simulate", "energy"))?;
    let t0 = args.t0.or(sec.and_then(|s| s.t0)).unwrap_or(DEFAULT_T0);
    let tmax = args.tmax.or(sec.and_then(|s| s.tmax)).unwrap_or(DEFAULT_TMAX);
    if !(tmax > t0 && t0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "time window needs 0 < t0 < tmax (got t0 = {t0}, tmax = {tmax})"
        )));
    }
    let shoot = args.shoot || sec.and_then(|s| s.shoot).unwrap_or(false);
    let amplitude = args
        .amplitude
        .or(sec.and_then(|s| s.amplitude))
        .unwrap_or(DEFAULT_AMPLITUDE);
    let order = args.order.or(sec.and_then(|s| s.order));
    let direction = args
        .model
        .direction
        .clone()
        .or_else(|| sec.and_then(|s| s.direction.clone()));

    let mut opts = OdeOptions::default();
    if let Some(rtol) = args.rtol.or(sec.and_then(|s| s.rtol)) {
        opts.rtol = rtol;
    }
    if let Some(atol) = args.atol.or(sec.and_then(|s| s.atol)) {
        opts.atol = atol;
    }

    // The jet must extend one degree past the conjugation order; without an
    // adapted observable a cubic expansion is enough for the chart data.
    let jet_order = order.map_or(3, |m| (m as usize + 1).max(3));
    let lm = build_local(&model, energy, direction.as_deref(), jet_order)?;
    let spectrum = spectral::decompose(&lm.b, HYPERBOLICITY_TOL)?;
    let nf = match order {
        Some(m) => Some(NormalForm::build(&lm, &spectrum, m)?),
        None => None,
    };

    let w0 = if shoot {
        let shot = shoot_stable(&lm, &spectrum, amplitude, &opts)?;
        if ctx.progress {
            eprintln!(
                "simulate: stable-manifold shot converged (shooting parameter {}, residual unstable component {:.3e})",
                shot.s, shot.final_unstable
            );
        }
        shot.w0
    } else {
        stable_direction(&spectrum)? * amplitude
    };
    let p0 = lift_to_full(&lm, &w0, t0)?;
    if ctx.progress {
        eprintln!("simulate: integrating t = {t0} .. {tmax}");
    }
    let full = integrate_full(&model, &p0, t0, tmax, &opts)?;
    let rows = observables(&lm, &spectrum, nf.as_ref(), &full);
    if rows.is_empty() {
        return Err(Error::RefinementFailed(
            "orbit left the channel chart immediately; no observable samples".into(),
        ));
    }

    let report = fit_report(&lm, &spectrum, &rows, &full, energy, t0, tmax, shoot, amplitude, order, ctx);

    let csv = {
        let mut table: Vec<Vec<String>> = Vec::with_capacity(rows.len());
        for r in &rows {
            table.push(vec![
                output::fnum(r.t),
                output::fnum(r.tau),
                output::fnum(r.q_s),
                output::fnum(r.q_u),
                output::fnum(r.q_minus),
                output::fnum(r.q_plus),
                output::fnum(r.gamma_abs),
                output::fnum_or_empty(r.big_gamma_abs),
                output::fnum(r.clock),
            ]);
        }
        output::csv_table(&CSV_HEADER, &table)
    };

    match output::format_for(ctx.out.as_deref(), Format::Csv)? {
        Format::Csv => {
            output::emit(ctx.out.as_deref(), &csv)?;
            let text = output::json_text(&report);
            if ctx.out.is_some() {
                print!("{text}");
            } else {
                eprint!("{text}");
            }
            Ok(())
        }
        Format::Json => {
            let mut combined = report;
            combined["samples"] = serde_json::json!(rows
                .iter()
                .map(|r| serde_json::json!({
                    "t": r.t,
                    "tau": r.tau,
                    "q_s": r.q_s,
                    "q_u": r.q_u,
                    "q_minus": r.q_minus,
                    "q_plus": r.q_plus,
                    "gamma_abs": r.gamma_abs,
                    "Gamma_abs": if r.big_gamma_abs.is_finite() {
                        serde_json::json!(r.big_gamma_abs)
                    } else {
                        serde_json::Value::Null
                    },
                    "clock": r.clock,
                }))
                .collect::<Vec<_>>());
            output::emit(ctx.out.as_deref(), &output::json_text(&combined))
        }
    }
}

/// Real vector spanning the slowest stable eigendirection, unit norm.
fn stable_direction(spectrum: &Spectrum) -> Result<DVector<f64>> {
    let d2 = spectrum.t.nrows();
    if spectrum.beta_s.is_empty() {
        return Err(Error::NoStableDirections);
    }
    let re = DVector::from_fn(d2, |i, _| spectrum.t[(i, 0)].re);
    if re.norm() > 1e-10 {
        return Ok(re.normalize());
    }
    let im = DVector::from_fn(d2, |i, _| spectrum.t[(i, 0)].im);
    if im.norm() > 1e-10 {
        return Ok(im.normalize());
    }
    Err(Error::RefinementFailed("degenerate stable eigenvector".into()))
}

#[allow(clippy::too_many_arguments)]
fn fit_report(
    lm: &chanalyze::reduction::LocalModel,
    spectrum: &Spectrum,
    rows: &[dynamics::ObservableRow],
    full: &dynamics::FullTrajectory,
    energy: f64,
    t0: f64,
    tmax: f64,
    shoot: bool,
    amplitude: f64,
    order: Option<u32>,
    ctx: &Ctx,
) -> serde_json::Value {
    let burn = burn_in_index(rows);
    let tail = burn.map(|i| &rows[i..]).unwrap_or(rows);

    // Monotonicity audit of q⁻ after burn-in: record the worst step
    // decrease relative to the contraction scale q⁺.
    let mut violations = 0usize;
    let mut worst_rel_drop: f64 = 0.0;
    for pair in tail.windows(2) {
        let drop = pair[0].q_minus - pair[1].q_minus;
        if drop > 0.0 {
            let rel = drop / pair[0].q_plus.max(f64::MIN_POSITIVE);
            if rel > 1e-8 {
                violations += 1;
            }
            worst_rel_drop = worst_rel_drop.max(rel);
        }
    }

    let gamma_fit = fit_exponent(
        &tail.iter().filter(|r| r.gamma_abs > 0.0).map(|r| (r.t, r.gamma_abs)).collect::<Vec<_>>(),
    )
    .ok();
    let big_gamma_fit = fit_exponent(
        &tail
            .iter()
            .filter(|r| r.big_gamma_abs.is_finite() && r.big_gamma_abs > 0.0)
            .map(|r| (r.t, r.big_gamma_abs))
            .collect::<Vec<_>>(),
    )
    .ok();
    let qu_vs_qs = qu_vs_qs_slope(tail);
    let clock = clock_check(lm, full);
    let beta1s = spectrum.beta1s().map(|z| [z.re, z.im]).ok();

    let fit_json = |fit: &Option<dynamics::ExponentFit>| match fit {
        Some(f) => serde_json::json!({
            "exponent": f.exponent,
            "stderr": f.stderr,
            "samples": f.samples,
        }),
        None => serde_json::Value::Null,
    };

    serde_json::json!({
        "spec_version": crate::config::SPEC_VERSION,
        "command": "simulate",
        "model": lm.model.describe(),
        "energy": energy,
        "window": { "t0": t0, "tmax": tmax },
        "shoot": shoot,
        "amplitude": amplitude,
        "order": order,
        "seed": ctx.seed,
        "channel": { "k": lm.channel.k, "residual": lm.channel.residual },
        "spectrum": spectrum.to_json(),
        "beta1s": beta1s,
        "energy_drift": full.energy_drift,
        "rows": rows.len(),
        "burn_in_t": burn.map(|i| rows[i].t),
        "q_minus_monotone": {
            "violations": violations,
            "worst_relative_drop": worst_rel_drop,
            "tolerated_relative_drop": 1e-8,
        },
        "fits": {
            "gamma_abs_exponent": fit_json(&gamma_fit),
            "Gamma_abs_exponent": fit_json(&big_gamma_fit),
            "log_qu_vs_log_qs_slope": qu_vs_qs,
        },
        "clock": {
            "max_deviation_late": clock.max_deviation_late,
            "samples": clock.samples,
        },
    })
}

/// Least-squares slope of log q_u against log q_s over the interior of the
/// post-burn-in window (the first and last tenth are dropped, mirroring the
/// exponent fits: the head still feels the initial transient, the tail sits
/// at the noise floor of the integrator).
fn qu_vs_qs_slope(rows: &[dynamics::ObservableRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.q_s > 0.0 && r.q_u > 0.0)
        .map(|r| (r.q_s.ln(), r.q_u.ln()))
        .collect();
    if pts.len() < 10 {
        return None;
    }
    let lo = pts.len() / 10;
    let hi = pts.len() - pts.len() / 10;
    let pts = &pts[lo..hi];
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}
