//! Command-line front end for the `chanalyze` library.
//!
//! Subcommands map one-to-one onto the library's analysis stages:
//!
//! * `analyze`    — solve the channel equations at one energy and report the
//!                  local linearized data (eigenvalues, pairing, class, m0).
//! * `resonances` — sweep a parameter or energy grid for eigenvalue
//!                  resonances of the reduced flow.
//! * `normalform` — build the adapted observable and measure how fast its
//!                  conjugation residual shrinks near the channel.
//! * `simulate`   — integrate a full orbit near a channel and export the
//!                  channel observables along it.
//! * `geometry`   — scaling-field checks, homogenization, and spiral
//!                  channel surveys.
//!
//! Exit codes: `0` success, `2` solver/numerical failure, `3` usage or
//! configuration error. With `--error-json` failures are also reported as a
//! machine-readable JSON object on stdout.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

mod commands;
mod config;
mod grid;
mod output;

use chanalyze::model::ModelConfig;
use chanalyze::Error;

#[derive(Parser, Debug)]
#[command(
    name = "chanalyze",
    version,
    about = "Numerical toolkit for classical Hamiltonian channels at spatial infinity",
    max_term_width = 100
)]
struct Cli {
    /// TOML config file (must declare `spec_version = 1`); command-line
    /// flags override config values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file; the extension (`.csv` or `.json`) selects the format.
    /// Without it each command writes its native format to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker threads for grid sweeps. Results are merged in grid order, so
    /// output is identical for any worker count.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Seed for all randomized sampling; a fixed seed makes every byte of
    /// the output reproducible.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    /// On failure, print a machine-readable `{"error": ...}` JSON object to
    /// stdout (the exit code is unchanged).
    #[arg(long, global = true)]
    error_json: bool,

    /// Stream progress lines to stderr during long sweeps.
    #[arg(long, global = true)]
    progress: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the channel equations and report the local linearization.
    Analyze(AnalyzeArgs),
    /// Sweep a grid for eigenvalue resonances of the reduced flow.
    Resonances(ResonancesArgs),
    /// Build the adapted observable and check its residual decay.
    Normalform(NormalformArgs),
    /// Integrate a full orbit near a channel and export observables.
    Simulate(SimulateArgs),
    /// Scaling fields, homogenization, and spiral channel surveys.
    Geometry(GeometryArgs),
}

/// Model selection flags shared by every subcommand. Only the flags relevant
/// to the chosen family are consulted; the rest may stay unset.
#[derive(Args, Debug, Default, Clone)]
struct ModelArgs {
    /// Model family: metric11 | morse | riema2 | riema3 | spiral |
    /// spiral-homogenized.
    #[arg(long, value_name = "FAMILY")]
    model: Option<String>,

    /// Family parameter `a` (metric11, riema2).
    #[arg(long, value_name = "A", allow_hyphen_values = true)]
    a: Option<f64>,

    /// Family parameter `b` (riema3).
    #[arg(long, value_name = "B", allow_hyphen_values = true)]
    b: Option<f64>,

    /// Homogeneity degree `kappa` (riema3).
    #[arg(long, value_name = "K", allow_hyphen_values = true)]
    kappa: Option<f64>,

    /// Spiral twist parameter `c` (spiral, spiral-homogenized).
    #[arg(long, value_name = "C", allow_hyphen_values = true)]
    c: Option<f64>,

    /// Sphere potential V(θ) as a trigonometric polynomial, e.g. "cos" or
    /// "2cos-0.3sin2" (morse family, n = 2).
    #[arg(long = "V", value_name = "TRIG", allow_hyphen_values = true)]
    potential: Option<String>,

    /// Spiral profile f(θ) as a trigonometric polynomial (spiral families).
    #[arg(long = "f", value_name = "TRIG", allow_hyphen_values = true)]
    profile: Option<String>,

    /// Critical direction of the sphere potential (morse family, n ≥ 3;
    /// comma-separated, need not be normalized).
    #[arg(long, value_name = "X1,..", value_delimiter = ',', allow_hyphen_values = true)]
    omega: Option<Vec<f64>>,

    /// Hessian eigenvalues of the sphere potential at the critical
    /// direction (morse family, n ≥ 3; comma-separated).
    #[arg(long, value_name = "Q1,..", value_delimiter = ',', allow_hyphen_values = true)]
    q: Option<Vec<f64>>,

    /// Potential value at the critical direction (morse family, n ≥ 3).
    #[arg(long, value_name = "V0", allow_hyphen_values = true)]
    v0: Option<f64>,

    /// Disable the smooth near-origin cutoff of sphere potentials.
    #[arg(long)]
    no_regularize: bool,

    /// Initial guess for the channel direction (comma-separated unit
    /// vector; defaults to the first coordinate axis).
    #[arg(long, value_name = "X1,..", value_delimiter = ',', allow_hyphen_values = true)]
    direction: Option<Vec<f64>>,
}

impl ModelArgs {
    /// Overlay these flags on the `[model]` config section (flags win) and
    /// produce the library model description.
    fn merge_into(&self, base: Option<&ModelConfig>) -> Result<ModelConfig, Error> {
        let mut cfg = base.cloned().unwrap_or_default();
        if let Some(fam) = &self.model {
            cfg.family = fam.clone();
        }
        if cfg.family.is_empty() {
            return Err(Error::InvalidInput(
                "no model selected: pass --model or a [model] section in the config".into(),
            ));
        }
        for (key, val) in [("a", self.a), ("b", self.b), ("kappa", self.kappa), ("c", self.c)] {
            if let Some(v) = val {
                cfg.params.insert(key.to_string(), v);
            }
        }
        match (&self.potential, &self.profile) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput(
                    "pass either --V (sphere potential) or --f (spiral profile), not both".into(),
                ))
            }
            (Some(v), None) => cfg.trig_coeffs = Some(v.clone()),
            (None, Some(f)) => cfg.trig_coeffs = Some(f.clone()),
            (None, None) => {}
        }
        if let Some(om) = &self.omega {
            cfg.omega = Some(om.clone());
        }
        if let Some(q) = &self.q {
            cfg.q = Some(q.clone());
        }
        if let Some(v0) = self.v0 {
            cfg.v0 = Some(v0);
        }
        if self.no_regularize {
            cfg.regularize = Some(false);
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
#[command(after_help = "OUTPUT:
  JSON report (default): spec_version, model echo, channel data (omega, xi,
  k), Hessian, linearization, eigenvalues, pairing check, classification,
  m0, tolerances.
  CSV (--out file.csv): columns index,re,im,block — one eigenvalue per row,
  block is `stable` or `unstable`.")]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Channel energy E.
    #[arg(long, value_name = "E", allow_hyphen_values = true)]
    energy: Option<f64>,

    /// Taylor order of the reduced Hamiltonian expansion (≥ 2).
    #[arg(long, value_name = "M")]
    order: Option<usize>,
}

#[derive(Args, Debug)]
#[command(after_help = "OUTPUT:
  CSV (default): columns grid_value,min_order,alpha,target,residual — one
  row per grid point in grid order. The last four columns describe the
  lowest-order resonance and stay empty at resonance-free points; alpha is
  `;`-joined, target indexes the eigenvalue list (stable block first).
  JSON (--out file.json): adds all hits per point, the per-point
  eigenvalues, and the resonance-free windows of the grid.")]
struct ResonancesArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Grid to sweep: `name=start:stop:step` (inclusive) or
    /// `name=v1,v2,...`. `name` is a model parameter or `energy`.
    #[arg(long, value_name = "SPEC")]
    grid: Option<String>,

    /// Channel energy E (required unless the grid sweeps `energy`).
    #[arg(long, value_name = "E", allow_hyphen_values = true)]
    energy: Option<f64>,

    /// Largest multi-index order |α| to search.
    #[arg(long, value_name = "M")]
    mmax: Option<u32>,

    /// Residual tolerance for declaring a resonance hit.
    #[arg(long, value_name = "TOL")]
    tol: Option<f64>,

    /// Node budget for the combinatorial search (guards against blow-up).
    #[arg(long, value_name = "N")]
    budget: Option<usize>,
}

#[derive(Args, Debug)]
#[command(after_help = "OUTPUT:
  JSON report (default): spec_version, model echo, m0, order, spectrum,
  adapted-observable coefficients, residual-decay ladder, fitted slope.
  CSV (--out file.csv): columns radius,residual — the decay ladder.")]
struct NormalformArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Channel energy E.
    #[arg(long, value_name = "E", allow_hyphen_values = true)]
    energy: Option<f64>,

    /// Conjugation order m (defaults to the admissible minimum m0).
    #[arg(long, value_name = "M")]
    order: Option<u32>,

    /// Largest sampling radius of the residual-decay ladder.
    #[arg(long, value_name = "R")]
    rmax: Option<f64>,

    /// Number of radius levels (each half the previous).
    #[arg(long, value_name = "N")]
    levels: Option<usize>,

    /// Sample directions per radius level.
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
#[command(after_help = "OUTPUT:
  CSV (default): columns t,tau,q_s,q_u,q_minus,q_plus,gamma_abs,Gamma_abs,
  clock — one row per accepted integrator step inside the channel chart.
  q_s/q_u are the squared stable/unstable eigencoordinate norms,
  q_minus = q_u − q_s, q_plus = q_s + q_u, gamma_abs = √q_plus, Gamma_abs
  is the adapted observable (empty without --order), clock = x_n/(k·t).
  A JSON fit report (exponents, monotonicity audit, clock calibration)
  goes to stdout when the CSV went to --out, to stderr otherwise; with
  --out file.json the report and the samples land in one file.")]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Channel energy E.
    #[arg(long, value_name = "E", allow_hyphen_values = true)]
    energy: Option<f64>,

    /// Start time of the full integration.
    #[arg(long, value_name = "T")]
    t0: Option<f64>,

    /// End time of the full integration.
    #[arg(long, value_name = "T")]
    tmax: Option<f64>,

    /// Refine the initial condition onto the stable manifold by shooting
    /// before lifting to the full flow.
    #[arg(long)]
    shoot: bool,

    /// Initial transverse amplitude in the channel chart.
    #[arg(long, value_name = "R")]
    amplitude: Option<f64>,

    /// Adapted-observable order; when set the Γ column of the CSV is
    /// filled, otherwise it is left empty.
    #[arg(long, value_name = "M")]
    order: Option<u32>,

    /// Relative tolerance of the adaptive integrator.
    #[arg(long, value_name = "TOL")]
    rtol: Option<f64>,

    /// Absolute tolerance of the adaptive integrator.
    #[arg(long, value_name = "TOL")]
    atol: Option<f64>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("geometry_mode").args(["spiral", "alpha_check", "homogenize"])))]
#[command(after_help = "OUTPUT:
  --spiral (CSV default): columns theta0,f0,f2,rho0,eig_re_1,eig_im_1,
  eig_re_2,eig_im_2,class — one row per channel angle, eigenvalues in the
  radial clock ascending by real then imaginary part.
  --alpha-check / --homogenize (JSON default): measured scaling exponent
  with spread and form residual, resp. degree-zero check plus the reduced
  spectrum of the homogenized channel.")]
struct GeometryArgs {
    #[command(flatten)]
    model: ModelArgs,

    /// Survey the channel angles of the spiral model built from --f and --c.
    #[arg(long)]
    spiral: bool,

    /// Measure the conformal-symplectic exponent α of a scaling field.
    #[arg(long)]
    alpha_check: bool,

    /// Homogenize a two-parameter scaling-invariant model and analyze the
    /// resulting channel.
    #[arg(long)]
    homogenize: bool,

    /// Channel energy E (spiral and homogenize modes).
    #[arg(long, value_name = "E", allow_hyphen_values = true)]
    energy: Option<f64>,

    /// Scaling field for --alpha-check: `euler`, `phase:<s>`, or
    /// `spiral:<c>`.
    #[arg(long, value_name = "FIELD")]
    field: Option<String>,

    /// Configuration-space dimension for --alpha-check.
    #[arg(long, value_name = "N")]
    dim: Option<usize>,

    /// Sample count for randomized geometry checks.
    #[arg(long, value_name = "N")]
    samples: Option<usize>,

    /// Position scaling degree κ₁ (homogenize mode).
    #[arg(long, value_name = "K", allow_hyphen_values = true)]
    kappa1: Option<f64>,

    /// Momentum scaling degree κ₂ (homogenize mode).
    #[arg(long, value_name = "K", allow_hyphen_values = true)]
    kappa2: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 3u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // Usage and configuration problems exit 3; everything the solver
            // itself raises exits 2.
            let code: u8 = match err {
                Error::InvalidInput(_) => 3,
                _ => 2,
            };
            if cli.error_json {
                let report = serde_json::json!({
                    "spec_version": config::SPEC_VERSION,
                    "error": { "name": err.name(), "message": err.to_string() },
                });
                println!("{}", serde_json::to_string_pretty(&report).expect("error report"));
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> chanalyze::Result<()> {
    let file = config::load(cli.config.as_deref())?;
    let jobs = cli.jobs.or(file.jobs);
    if let Some(0) = jobs {
        return Err(Error::InvalidInput("--jobs must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs {
        // Ignore the error from a second initialization (tests invoke the
        // binary once per process, so this only fires in unusual embeddings).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    if jobs.is_some_and(|n| n > 1) {
        eprintln!("note: built without the `parallel` feature; --jobs has no effect");
    }
    let ctx = commands::Ctx {
        out: cli.out.clone(),
        seed: cli.seed.or(file.seed).unwrap_or(17),
        progress: cli.progress,
    };
    match &cli.command {
        Command::Analyze(args) => commands::analyze::run(args, &file, &ctx),
        Command::Resonances(args) => commands::resonances::run(args, &file, &ctx),
        Command::Normalform(args) => commands::normalform::run(args, &file, &ctx),
        Command::Simulate(args) => commands::simulate::run(args, &file, &ctx),
        Command::Geometry(args) => commands::geometry::run(args, &file, &ctx),
    }
}
