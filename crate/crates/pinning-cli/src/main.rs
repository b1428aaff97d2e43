//! Command line front end: annealed critical curves, free-energy surfaces,
//! the validation suite, and tilted-process sampling.
//!
//! Exit codes: 0 ok, 1 validation failure, 2 bad input, 3 numerical failure.

mod config;
mod grid;
mod output;
mod validate;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use config::{resolve, resolve_opt, ConfigFile};
use grid::{parse_coeffs, parse_grid, parse_single};
use output::{fmt_f64, write_output, Cell, Format, Table};
use pinning::*;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or law input (exit 2).
    Input(String),
    /// An iterative method failed (exit 3).
    Numeric(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<pinning::Error> for CliError {
    fn from(e: pinning::Error) -> Self {
        match e {
            Error::InvalidParameter(m) => CliError::Input(m),
            Error::NumericalFailure(m) | Error::NumericalInconsistency(m) => CliError::Numeric(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pinning",
    version,
    about = "Annealed critical curve and free energy of the pinning model with finite-range correlated Gaussian disorder"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Annealed critical curve over a β grid
    Curve(CurveArgs),
    /// Annealed free-energy surface over a (β, h) grid
    FreeEnergy(FreeEnergyArgs),
    /// Run the validation suite and emit a JSON report
    Validate(ValidateArgs),
    /// Sample the tilted contact process
    Sample(SampleArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Tail exponent α of the zeta-family gap law K(n) ∝ n^{-(1+α)}
    #[arg(long)]
    alpha: Option<f64>,
    /// Escape mass K(∞) in [0, 1)
    #[arg(long)]
    k_infinity: Option<f64>,
    /// Moving-average coefficients a_0,…,a_q (comma separated, unit norm)
    #[arg(long, allow_hyphen_values = true)]
    coeffs: Option<String>,
    /// Tabulation cutoff for the gap law
    #[arg(long)]
    n_max: Option<usize>,
    /// JSON mass-table law (replaces --alpha/--k-infinity)
    #[arg(long)]
    mass_table: Option<PathBuf>,
    /// Seed for every stochastic component
    #[arg(long)]
    seed: Option<u64>,
    /// Eigen-residual and bisection tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Output file (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json
    #[arg(long)]
    format: Option<String>,
    /// Worker threads for grid sweeps (default: available parallelism)
    #[arg(long)]
    threads: Option<usize>,
    /// key=value config file; CLI flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// β grid: start:end:step, a comma list, or one value
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
}

#[derive(Args)]
struct FreeEnergyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// β grid
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// h grid
    #[arg(long = "h", allow_hyphen_values = true)]
    h: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Skip the long-horizon growth-rate, LLN, and error-scaling checks
    #[arg(long)]
    quick: bool,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Disorder strength β (single value)
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Horizon N
    #[arg(long)]
    n: Option<usize>,
    /// Number of independent paths
    #[arg(long)]
    paths: Option<usize>,
}

/// Everything the shared flags resolve to.
struct Common {
    law: InterArrivalLaw,
    ma: MovingAverage,
    seed: u64,
    tol: f64,
    out: Option<PathBuf>,
    format: Format,
    threads: usize,
    echo: Vec<(String, String)>,
}

const DEFAULT_COEFFS: &str = "0.8,0.36,0.48";

fn resolve_common(args: &CommonArgs, file: &ConfigFile, default_n_max: usize) -> std::result::Result<Common, CliError> {
    let alpha = resolve(args.alpha, file.get("alpha")?, 1.0);
    let k_infinity = resolve(args.k_infinity, file.get("k_infinity")?, 0.0);
    let n_max = resolve(args.n_max, file.get("n_max")?, default_n_max);
    let mass_table = resolve_opt(args.mass_table.clone(), file.get_string("mass_table").map(PathBuf::from));
    let coeffs_raw = resolve(args.coeffs.clone(), file.get_string("coeffs"), DEFAULT_COEFFS.to_string());
    let seed = resolve(args.seed, file.get("seed")?, 42);
    let tol = resolve(args.tol, file.get("tol")?, 1e-13);
    if tol.is_nan() || tol <= 0.0 {
        return Err(CliError::input("tolerance must be positive"));
    }
    let out = resolve_opt(args.out.clone(), file.get_string("out").map(PathBuf::from));
    let format: Format = resolve(args.format.clone(), file.get_string("format"), "csv".into())
        .parse()
        .map_err(CliError::Input)?;
    let threads = resolve(args.threads, file.get("threads")?, 0usize);

    let mut echo = Vec::new();
    let law = match &mass_table {
        Some(path) => {
            echo.push(("mass_table".into(), path.display().to_string()));
            load_mass_table(path)?
        }
        None => {
            echo.push(("alpha".into(), fmt_f64(alpha)));
            echo.push(("k_infinity".into(), fmt_f64(k_infinity)));
            echo.push(("n_max".into(), n_max.to_string()));
            build_zeta_law(alpha, k_infinity, n_max)?
        }
    };
    let ma = MovingAverage::new_normalizing(parse_coeffs(&coeffs_raw)?)?;
    echo.push(("coeffs".into(), coeffs_raw));
    echo.push(("seed".into(), seed.to_string()));
    echo.push(("tol".into(), fmt_f64(tol)));
    echo.push((
        "threads".into(),
        if threads == 0 { "auto".into() } else { threads.to_string() },
    ));
    Ok(Common { law, ma, seed, tol, out, format, threads, echo })
}

fn load_mass_table(path: &Path) -> std::result::Result<InterArrivalLaw, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(cfg) = serde_json::from_str::<LawConfig>(&text) {
        return Ok(cfg.build()?);
    }
    let masses: Vec<f64> = serde_json::from_str(&text).map_err(|e| {
        CliError::input(format!("{} is neither a law document nor a mass array: {e}", path.display()))
    })?;
    Ok(build_table_law(masses)?)
}

fn thread_pool(threads: usize) -> std::result::Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::input(format!("cannot build thread pool: {e}")))
}

fn cmd_curve(args: &CurveArgs) -> std::result::Result<i32, CliError> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let mut common = resolve_common(&args.common, &file, 10_000)?;
    let beta_spec = resolve(args.beta.clone(), file.get_string("beta"), "0:2:0.02".into());
    let betas = parse_grid(&beta_spec)?;
    common.echo.push(("beta".into(), beta_spec));

    let rho = common.ma.correlations();
    let law = &common.law;
    let slope = weak_disorder_slope(law, &rho)?;
    let h_c_zero = -(1.0 - law.k_infinity()).ln();
    let tol = common.tol;

    use rayon::prelude::*;
    let pool = thread_pool(common.threads)?;
    let rows: Vec<Vec<Cell>> = pool.install(|| {
        betas
            .par_iter()
            .map(|&beta| -> pinning::Result<Vec<Cell>> {
                let p = curve_point(law, &rho, beta, tol)?;
                let closed = match rho.q() {
                    1 => Cell::F64(closed_form_q1(law, &rho, beta)?),
                    2 => Cell::F64(h_c_zero - closed_form_q2(law, &rho, beta)?),
                    _ => Cell::Empty,
                };
                Ok(vec![
                    Cell::F64(p.beta),
                    Cell::F64(p.lambda),
                    Cell::F64(p.big_lambda),
                    Cell::F64(p.h_c_ann),
                    closed,
                    Cell::F64(h_c_zero - slope * beta * beta / 2.0),
                ])
            })
            .collect::<pinning::Result<_>>()
    })?;

    Table {
        command: "curve",
        config: common.echo.clone(),
        columns: vec!["beta", "lambda", "Lambda", "h_c_ann", "closed_form", "slope_asymptote_prediction"],
        rows,
    }
    .write(common.format, common.out.as_deref())?;
    Ok(0)
}

fn cmd_free_energy(args: &FreeEnergyArgs) -> std::result::Result<i32, CliError> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let mut common = resolve_common(&args.common, &file, 10_000)?;
    let beta_spec = resolve(args.beta.clone(), file.get_string("beta"), "0:1.6:0.4".into());
    let h_spec = resolve(args.h.clone(), file.get_string("h"), "-1:1:0.1".into());
    let betas = parse_grid(&beta_spec)?;
    let hs = parse_grid(&h_spec)?;
    common.echo.push(("beta".into(), beta_spec));
    common.echo.push(("h".into(), h_spec));

    let rho = common.ma.correlations();
    let law = &common.law;
    let tol = common.tol;

    use rayon::prelude::*;
    let pool = thread_pool(common.threads)?;
    let slices: Vec<Vec<Vec<Cell>>> = pool.install(|| {
        betas
            .par_iter()
            .map(|&beta| -> pinning::Result<Vec<Vec<Cell>>> {
                let m = build_qstar(law, &rho, beta)?;
                let spectral = perron(&m, tol)?;
                let tilted = tilted_kernel(&m, &spectral);
                let big_lambda = 0.5 * beta * beta + spectral.lambda.ln();
                hs.iter()
                    .map(|&h| {
                        let epsilon = h + big_lambda;
                        let (value, width) = if epsilon > 0.0 {
                            let r = f_tilde(&tilted, law, epsilon, tol)?;
                            (r.f_tilde, r.bracket.1 - r.bracket.0)
                        } else {
                            (0.0, 0.0)
                        };
                        Ok(vec![
                            Cell::F64(beta),
                            Cell::F64(h),
                            Cell::F64(big_lambda),
                            Cell::F64(epsilon),
                            Cell::F64(value),
                            Cell::F64(width),
                        ])
                    })
                    .collect()
            })
            .collect::<pinning::Result<_>>()
    })?;

    Table {
        command: "free-energy",
        config: common.echo.clone(),
        columns: vec!["beta", "h", "Lambda", "epsilon", "f_ann", "bracket_width"],
        rows: slices.into_iter().flatten().collect(),
    }
    .write(common.format, common.out.as_deref())?;
    Ok(0)
}

fn cmd_validate(args: &ValidateArgs) -> std::result::Result<i32, CliError> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let quick = args.quick || file.get::<bool>("quick")?.unwrap_or(false);
    // full mode runs growth-rate checks at horizon 4000, so the law must be
    // tabulated ten times farther
    let default_n_max = kernels::default_n_max(if quick { 0 } else { 4000 });
    let mut common = resolve_common(&args.common, &file, default_n_max)?;
    common.echo.push(("quick".into(), quick.to_string()));

    let suite = validate::Suite {
        law: common.law.clone(),
        ma: common.ma.clone(),
        seed: common.seed,
        tol: common.tol,
        quick,
    };
    let checks = validate::run(&suite)?;
    let all_pass = checks.iter().all(|c| c.pass);
    let config: serde_json::Map<String, serde_json::Value> = common
        .echo
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    let doc = json!({
        "command": "validate",
        "config": config,
        "pass": all_pass,
        "checks": checks,
    });
    let mut rendered = serde_json::to_string_pretty(&doc).expect("json rendering");
    rendered.push('\n');
    write_output(common.out.as_deref(), &rendered)?;
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_sample(args: &SampleArgs) -> std::result::Result<i32, CliError> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let mut common = resolve_common(&args.common, &file, 10_000)?;
    let beta_spec = resolve(args.beta.clone(), file.get_string("beta"), "1".into());
    let beta = parse_single(&beta_spec)?;
    let n = resolve(args.n, file.get("n")?, 100_000usize);
    let paths = resolve(args.paths, file.get("paths")?, 1usize).max(1);
    common.echo.push(("beta".into(), beta_spec));
    common.echo.push(("n".into(), n.to_string()));
    common.echo.push(("paths".into(), paths.to_string()));

    let rho = common.ma.correlations();
    let law = &common.law;
    let m = build_qstar(law, &rho, beta)?;
    let spectral = perron(&m, common.tol)?;
    let tilted = tilted_kernel(&m, &spectral);
    let inv = invariant_mu(&tilted, law, common.tol)?;
    let c = inv.mean_spacing();

    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let mut sampled = Vec::with_capacity(paths);
    for i in 0..paths {
        rng.set_stream(i as u64);
        sampled.push(sampler::sample_tilde_with(law, &rho, beta, &spectral, n, common.seed, &mut rng)?);
    }

    match common.format {
        Format::Csv => {
            let mut s = String::new();
            s.push_str("# pinning sample\n");
            for (k, v) in &common.echo {
                s.push_str(&format!("# {k} = {v}\n"));
            }
            if c.is_finite() {
                s.push_str(&format!("# inverse_mean_spacing = {}\n", fmt_f64(1.0 / c)));
            } else {
                s.push_str("# inverse_mean_spacing = infinite (null-recurrent regime)\n");
            }
            for (i, path) in sampled.iter().enumerate() {
                s.push_str(&format!(
                    "# path {i}: contacts = {}, density = {}\n",
                    path.num_contacts(),
                    fmt_f64(path.density())
                ));
                for contact in &path.contacts {
                    s.push_str(&format!("{contact}\n"));
                }
            }
            write_output(common.out.as_deref(), &s)?;
        }
        Format::Json => {
            let config: serde_json::Map<String, serde_json::Value> = common
                .echo
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect();
            let doc = json!({
                "command": "sample",
                "config": config,
                "inverse_mean_spacing": if c.is_finite() { Some(1.0 / c) } else { None },
                "paths": sampled.iter().enumerate().map(|(i, p)| json!({
                    "stream": i,
                    "contacts": p.contacts,
                    "density": p.density(),
                })).collect::<Vec<_>>(),
            });
            let mut rendered = serde_json::to_string_pretty(&doc).expect("json rendering");
            rendered.push('\n');
            write_output(common.out.as_deref(), &rendered)?;
        }
    }
    Ok(0)
}

fn run(cli: Cli) -> std::result::Result<i32, CliError> {
    match &cli.command {
        Cmd::Curve(args) => cmd_curve(args),
        Cmd::FreeEnergy(args) => cmd_free_energy(args),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Sample(args) => cmd_sample(args),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
