//! `chanalyze geometry` — scaling-field exponents, homogenization, and
//! spiral channel surveys.

use chanalyze::geometry::{
    conformal_flow_factor, homogenize_two_param, lie_derivative_alpha, spiral_analysis,
    ScalingField,
};
use chanalyze::model::{model_from_config, TrigPoly};
use chanalyze::spectral::{self, HYPERBOLICITY_TOL};
use chanalyze::{Error, Result};

use crate::commands::{build_local, classification, Ctx};
use crate::config::{missing, FileConfig, GeometrySection};
use crate::output::{self, Format};
use crate::GeometryArgs;

/// Columns of the spiral channel survey, in order. Eigenvalues are listed
/// ascending by real part, then imaginary part.
const SPIRAL_HEADER: [&str; 9] =
    ["theta0", "f0", "f2", "rho0", "eig_re_1", "eig_im_1", "eig_re_2", "eig_im_2", "class"];

pub fn run(args: &GeometryArgs, file: &FileConfig, ctx: &Ctx) -> Result<()> {
    let sec = file.geometry.as_ref();
    let mode = if args.spiral {
        "spiral"
    } else if args.alpha_check {
        "alpha-check"
    } else if args.homogenize {
        "homogenize"
    } else {
        match sec.and_then(|s| s.mode.as_deref()) {
            Some(m @ ("spiral" | "alpha-check" | "homogenize")) => m,
            Some(other) => {
                return Err(Error::InvalidInput(format!(
                    "[geometry].mode `{other}` is not one of spiral | alpha-check | homogenize"
                )))
            }
            None => {
                return Err(Error::InvalidInput(
                    "geometry needs a mode: pass --spiral, --alpha-check, or --homogenize".into(),
                ))
            }
        }
    };
    match mode {
        "spiral" => run_spiral(args, file, sec, ctx),
        "alpha-check" => run_alpha(args, sec, ctx),
        _ => run_homogenize(args, file, sec, ctx),
    }
}

fn run_spiral(
    args: &GeometryArgs,
    file: &FileConfig,
    sec: Option<&GeometrySection>,
    ctx: &Ctx,
) -> Result<()> {
    let model_cfg = file.model.as_ref();
    let f_str = args
        .model
        .profile
        .clone()
        .or_else(|| model_cfg.and_then(|m| m.trig_coeffs.clone()))
        .ok_or_else(|| missing("geometry", "f"))?;
    let c = args
        .model
        .c
        .or_else(|| model_cfg.and_then(|m| m.params.get("c").copied()))
        .ok_or_else(|| missing("geometry", "c"))?;
    let energy = args
        .energy
        .or_else(|| sec.and_then(|s| s.energy))
        .ok_or_else(|| missing("geometry", "energy"))?;
    let f: TrigPoly = f_str.parse()?;
    if ctx.progress {
        eprintln!("geometry: surveying spiral channels of f = {f}, c = {c}, E = {energy}");
    }
    let roots = spiral_analysis(&f, c, energy)?;

    match output::format_for(ctx.out.as_deref(), Format::Csv)? {
        Format::Csv => {
            let rows: Vec<Vec<String>> = roots
                .iter()
                .map(|r| {
                    vec![
                        output::fnum(r.theta0),
                        output::fnum(r.f0),
                        output::fnum(r.f2),
                        output::fnum(r.rho0),
                        output::fnum(r.eigenvalues[0].re),
                        output::fnum(r.eigenvalues[0].im),
                        output::fnum(r.eigenvalues[1].re),
                        output::fnum(r.eigenvalues[1].im),
                        r.class.clone(),
                    ]
                })
                .collect();
            output::emit(ctx.out.as_deref(), &output::csv_table(&SPIRAL_HEADER, &rows))
        }
        Format::Json => {
            let report = serde_json::json!({
                "spec_version": crate::config::SPEC_VERSION,
                "command": "geometry",
                "mode": "spiral",
                "f": f.to_string(),
                "c": c,
                "energy": energy,
                "channels": roots,
            });
            output::emit(ctx.out.as_deref(), &output::json_text(&report))
        }
    }
}

fn run_alpha(args: &GeometryArgs, sec: Option<&GeometrySection>, ctx: &Ctx) -> Result<()> {
    let field_str = args
        .field
        .clone()
        .or_else(|| sec.and_then(|s| s.field.clone()))
        .unwrap_or_else(|| "euler".to_string());
    let field = parse_field(&field_str)?;
    let dim = args.dim.or_else(|| sec.and_then(|s| s.dim)).unwrap_or(2);
    if dim < 2 {
        return Err(Error::InvalidInput("--dim must be at least 2".into()));
    }
    if matches!(field, ScalingField::SpiralField { .. }) && dim != 2 {
        return Err(Error::InvalidInput(
            "the spiral scaling field is only defined in dimension 2".into(),
        ));
    }
    let samples = args.samples.or_else(|| sec.and_then(|s| s.samples)).unwrap_or(100);

    let report = lie_derivative_alpha(&field, dim, samples, ctx.seed);
    // Independent cross-check: the time-1 scaling flow should multiply
    // symplectic areas by exp(α).
    let measured_factor = conformal_flow_factor(&field, dim, 1.0);
    let predicted_factor = report.alpha.exp();

    let json = serde_json::json!({
        "spec_version": crate::config::SPEC_VERSION,
        "command": "geometry",
        "mode": "alpha-check",
        "field": field_str,
        "dim": dim,
        "samples": report.samples,
        "seed": ctx.seed,
        "alpha": report.alpha,
        "alpha_spread": report.alpha_spread,
        "max_form_residual": report.max_form_residual,
        "flow_factor": {
            "t": 1.0,
            "measured": measured_factor,
            "predicted": predicted_factor,
        },
    });
    match output::format_for(ctx.out.as_deref(), Format::Json)? {
        Format::Json => output::emit(ctx.out.as_deref(), &output::json_text(&json)),
        Format::Csv => {
            let header = ["field", "dim", "alpha", "alpha_spread", "max_form_residual"];
            let rows = vec![vec![
                field_str,
                dim.to_string(),
                output::fnum(report.alpha),
                format!("{:e}", report.alpha_spread),
                format!("{:e}", report.max_form_residual),
            ]];
            output::emit(ctx.out.as_deref(), &output::csv_table(&header, &rows))
        }
    }
}

fn run_homogenize(
    args: &GeometryArgs,
    file: &FileConfig,
    sec: Option<&GeometrySection>,
    ctx: &Ctx,
) -> Result<()> {
    let cfg = args.model.merge_into(file.model.as_ref())?;
    let model = model_from_config(&cfg)?;
    let kappa1 = args
        .kappa1
        .or_else(|| sec.and_then(|s| s.kappa1))
        .ok_or_else(|| missing("geometry", "kappa1"))?;
    let kappa2 = args
        .kappa2
        .or_else(|| sec.and_then(|s| s.kappa2))
        .ok_or_else(|| missing("geometry", "kappa2"))?;
    let samples = args.samples.or_else(|| sec.and_then(|s| s.samples)).unwrap_or(40);

    if ctx.progress {
        eprintln!("geometry: homogenizing with position degree {kappa1}, momentum degree {kappa2}");
    }
    let wrapped = homogenize_two_param(&model, kappa1, kappa2, samples, ctx.seed)?;
    let degree_zero = wrapped.check_homogeneity(samples, &[0.5, 1.7, 3.0], 2.0, 1e-8, ctx.seed);

    // With an energy the homogenized model is pushed through the channel
    // pipeline so the caller sees the reduced spectrum it induces.
    let channel = match args.energy.or_else(|| sec.and_then(|s| s.energy)) {
        None => serde_json::Value::Null,
        Some(energy) => {
            let direction = args.model.direction.clone();
            let lm = build_local(&wrapped, energy, direction.as_deref(), 2)?;
            let spectrum = spectral::decompose(&lm.b, HYPERBOLICITY_TOL)?;
            let ratio = match (spectrum.beta_u.first(), spectrum.beta_s.first()) {
                (Some(u), Some(s)) => {
                    let r = u / s;
                    serde_json::json!([r.re, r.im])
                }
                _ => serde_json::Value::Null,
            };
            serde_json::json!({
                "energy": energy,
                "k": lm.channel.k,
                "spectrum": spectrum.to_json(),
                "classification": classification(&spectrum),
                "unstable_over_stable_ratio": ratio,
            })
        }
    };

    let report = serde_json::json!({
        "spec_version": crate::config::SPEC_VERSION,
        "command": "geometry",
        "mode": "homogenize",
        "base_model": model.describe(),
        "kappa1": kappa1,
        "kappa2": kappa2,
        "interpolation_s": kappa2 / (kappa2 - kappa1),
        "degree_zero_check": degree_zero,
        "channel": channel,
        "seed": ctx.seed,
    });
    match output::format_for(ctx.out.as_deref(), Format::Json)? {
        Format::Json => output::emit(ctx.out.as_deref(), &output::json_text(&report)),
        Format::Csv => Err(Error::InvalidInput(
            "geometry --homogenize emits a JSON report; use --out file.json".into(),
        )),
    }
}

/// Parse `euler`, `phase:<s>`, or `spiral:<c>`.
fn parse_field(s: &str) -> Result<ScalingField> {
    if s == "euler" {
        return Ok(ScalingField::Euler);
    }
    if let Some(rest) = s.strip_prefix("phase:") {
        let val: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad phase scaling parameter `{rest}`")))?;
        return Ok(ScalingField::PhaseScaling { s: val });
    }
    if let Some(rest) = s.strip_prefix("spiral:") {
        let val: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad spiral twist parameter `{rest}`")))?;
        return Ok(ScalingField::SpiralField { c: val });
    }
    Err(Error::InvalidInput(format!(
        "unknown scaling field `{s}` (expected euler, phase:<s>, or spiral:<c>)"
    )))
}
