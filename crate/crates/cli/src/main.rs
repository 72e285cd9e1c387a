//! Command-line front end: generate ensembles, run lambda sweeps, probe
//! stationarity, and factor unit-determinant matrices into transvections.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 sweep gate failed
//! (non-convergence or slope below 1.7), 3 degenerate spectra, 4 determinant
//! gate.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use jdlab::{
    build_m0, build_m_a_lambda, build_m_lambda, build_n_a_lambda, decompose_transvections,
    fro_dist, jacobi_minimize, lambda_sweep, random_gaussian, random_setup, random_sl,
    random_unitary, s_first_order, s_map, separation_condition, stationarity_residual,
    transvection_product, CenteredParams, Ensemble, JdError, Mat, PerturbationSetup, RngSeed,
    Scalar, SolverConfig, SweepReport,
};

#[derive(Parser)]
#[command(name = "jdlab", version, about = "joint-diagonalization laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded experiment setup and its ensembles
    Generate(GenerateArgs),
    /// Verify the first-order prediction over a lambda grid
    Sweep(SweepArgs),
    /// Report stationarity residuals and expansion remainders
    Stationarity(StationarityArgs),
    /// Factor a unit-determinant matrix into transvections
    Transvect(TransvectArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON file with the same keys as the long flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Falls back to the JD_SEED environment variable, then 1
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Complex scalar as "re" or "re,im"
    #[arg(long)]
    a: Option<String>,
    /// Transvection position as 1-based "i,j"
    #[arg(long)]
    tpos: Option<String>,
    /// Keep every generated object real
    #[arg(long)]
    real: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    n: Option<usize>,
    m: Option<usize>,
    seed: Option<u64>,
    lambda: Option<f64>,
    a: Option<String>,
    tpos: Option<String>,
    real: Option<bool>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON file with the same keys as the long flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Setup JSON produced by `generate`; replaces the generation flags
    #[arg(long)]
    setup: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    tpos: Option<String>,
    #[arg(long)]
    real: bool,
    /// Comma-separated lambda values, e.g. "1e-2,3e-3,1e-3"
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Solver improvement tolerance relative to the initial cost
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    setup: Option<PathBuf>,
    n: Option<usize>,
    m: Option<usize>,
    seed: Option<u64>,
    a: Option<String>,
    tpos: Option<String>,
    real: Option<bool>,
    lambda_grid: Option<String>,
    tol: Option<f64>,
    max_sweeps: Option<usize>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StationarityArgs {
    /// JSON file with the same keys as the long flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Use real symmetric ensembles for the residual probes
    #[arg(long)]
    symmetric: bool,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Optional JSON report path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct StationarityConfig {
    trials: Option<usize>,
    seed: Option<u64>,
    n: Option<usize>,
    m: Option<usize>,
    symmetric: Option<bool>,
    lambda: Option<f64>,
    a: Option<String>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransvectArgs {
    /// Matrix JSON to factor
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Generate a random unit-determinant matrix of this size instead
    #[arg(long)]
    random_sl: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    real: bool,
    /// Factor-list JSON path
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Generate(args) => cmd_generate(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Stationarity(args) => cmd_stationarity(args),
        Cmd::Transvect(args) => cmd_transvect(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {}", msg.text);
            ExitCode::from(msg.code)
        }
    }
}

struct Failure {
    code: u8,
    text: String,
}

impl Failure {
    fn usage(text: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            text: text.into(),
        }
    }
}

impl From<JdError> for Failure {
    fn from(e: JdError) -> Failure {
        let code = match &e {
            JdError::DegenerateSpectra { .. } => 3,
            JdError::DeterminantNotOne { .. } => 4,
            _ => 1,
        };
        Failure {
            code,
            text: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure::usage(e.to_string())
    }
}

fn parse_complex(s: &str) -> Result<Scalar, Failure> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || Failure::usage(format!("cannot parse complex scalar {s:?}"));
    match parts.as_slice() {
        [re] => Ok(Scalar::new(re.trim().parse().map_err(|_| bad())?, 0.0)),
        [re, im] => Ok(Scalar::new(
            re.trim().parse().map_err(|_| bad())?,
            im.trim().parse().map_err(|_| bad())?,
        )),
        _ => Err(bad()),
    }
}

/// 1-based "i,j" to 0-based (i, j)
fn parse_tpos(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::usage(format!("cannot parse position {s:?}"));
    let parts: Vec<&str> = s.split(',').collect();
    let [i, j] = parts.as_slice() else {
        return Err(bad());
    };
    let i: usize = i.trim().parse().map_err(|_| bad())?;
    let j: usize = j.trim().parse().map_err(|_| bad())?;
    if i == 0 || j == 0 || i == j {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let grid = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| Failure::usage(format!("cannot parse lambda grid {s:?}")))?;
    if grid.is_empty() {
        return Err(Failure::usage("empty lambda grid"));
    }
    Ok(grid)
}

fn load_config<T: Default + for<'de> Deserialize<'de>>(
    path: &Option<PathBuf>,
) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
    }
}

fn env_seed() -> Option<u64> {
    std::env::var("JD_SEED").ok().and_then(|s| s.parse().ok())
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config).or_else(env_seed).unwrap_or(1)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::usage(e.to_string()))
}

fn cmd_generate(args: GenerateArgs) -> Result<u8, Failure> {
    let cfg: GenerateConfig = load_config(&args.config)?;
    let n = args.n.or(cfg.n).unwrap_or(4);
    let m = args.m.or(cfg.m).unwrap_or(5);
    let seed = resolve_seed(args.seed, cfg.seed);
    let lambda = args.lambda.or(cfg.lambda).unwrap_or(0.0);
    let a = parse_complex(args.a.or(cfg.a).as_deref().unwrap_or("0"))?;
    let tpos = parse_tpos(args.tpos.or(cfg.tpos).as_deref().unwrap_or("1,2"))?;
    let real = args.real || cfg.real.unwrap_or(false);
    let out = args
        .out
        .or(cfg.out)
        .ok_or_else(|| Failure::usage("--out DIR is required"))?;
    if tpos.0 >= n || tpos.1 >= n {
        return Err(Failure::usage("--tpos outside the matrix"));
    }

    let setup = random_setup(n, m, RngSeed(seed), lambda, a, tpos, real);
    fs::create_dir_all(&out)?;
    write_json(&out, "setup.json", &setup)?;
    write_json(&out, "m0.json", &build_m0(&setup.u, &setup.diag)?)?;
    write_json(&out, "m_lambda.json", &build_m_lambda(&setup)?)?;
    write_json(&out, "m_a_lambda.json", &build_m_a_lambda(&setup)?)?;
    write_json(&out, "n_a_lambda.json", &build_n_a_lambda(&setup)?)?;
    let verdict = if separation_condition(&setup.diag) {
        "satisfied"
    } else {
        "violated"
    };
    println!("separation condition: {verdict}");
    println!("wrote setup and 4 ensembles to {}", out.display());
    Ok(0)
}

fn load_setup(path: &Path) -> Result<PerturbationSetup, Failure> {
    let setup: PerturbationSetup = serde_json::from_str(&fs::read_to_string(path)?)?;
    setup.validate()?;
    Ok(setup)
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, Failure> {
    let cfg: SweepConfig = load_config(&args.config)?;
    let setup = match args.setup.or(cfg.setup) {
        Some(path) => load_setup(&path)?,
        None => {
            let n = args.n.or(cfg.n).unwrap_or(4);
            let m = args.m.or(cfg.m).unwrap_or(5);
            let seed = resolve_seed(args.seed, cfg.seed);
            let a = parse_complex(args.a.or(cfg.a).as_deref().unwrap_or("0"))?;
            let tpos = parse_tpos(args.tpos.or(cfg.tpos).as_deref().unwrap_or("1,2"))?;
            let real = args.real || cfg.real.unwrap_or(false);
            random_setup(n, m, RngSeed(seed), 0.0, a, tpos, real)
        }
    };
    let grid = parse_grid(
        args.lambda_grid
            .or(cfg.lambda_grid)
            .as_deref()
            .unwrap_or("1e-2,3e-3,1e-3,3e-4,1e-4"),
    )?;
    let solver_cfg = SolverConfig {
        max_sweeps: args.max_sweeps.or(cfg.max_sweeps).unwrap_or(100),
        rel_tol: args.tol.or(cfg.tol).unwrap_or(1e-12),
        ..SolverConfig::default()
    };
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(1);
    let out = args
        .out
        .or(cfg.out)
        .ok_or_else(|| Failure::usage("--out DIR is required"))?;

    let report = if jobs <= 1 {
        lambda_sweep(&setup, &grid, &solver_cfg)?
    } else {
        use rayon::prelude::*;
        let rows = thread_pool(jobs)?.install(|| {
            grid.par_iter()
                .map(|&l| Ok(lambda_sweep(&setup, &[l], &solver_cfg)?.rows.remove(0)))
                .collect::<Result<Vec<_>, JdError>>()
        })?;
        SweepReport::from_rows(rows, setup.seed)
    };

    fs::create_dir_all(&out)?;
    fs::write(out.join("sweep.csv"), report.to_csv())?;
    let summary = json!({
        "slope_d": report.slope_d,
        "setup_seed": report.setup_seed,
        "all_converged": report.all_converged(),
        "rows": report.rows.len(),
    });
    write_json(&out, "summary.json", &summary)?;

    match report.slope_d {
        Some(s) => println!("slope_d = {s:.15e}"),
        None => println!("slope_d fit skipped (all distances at noise level)"),
    }
    let pass = report.all_converged() && report.slope_d.is_none_or(|s| s >= 1.7);
    Ok(if pass { 0 } else { 2 })
}

struct Trial {
    r_random: f64,
    r_min: f64,
    halving_ratio: f64,
}

fn run_trial(
    base_seed: u64,
    t: u64,
    n: usize,
    m: usize,
    symmetric: bool,
    lambda: f64,
    a: Scalar,
) -> Result<Trial, JdError> {
    let mats: Vec<Mat> = (0..m as u64)
        .map(|k| {
            let g = random_gaussian(n, n, RngSeed(base_seed + 1000 * t + k), symmetric);
            if symmetric {
                g.add(&g.adjoint()).scale_re(0.5)
            } else {
                g
            }
        })
        .collect();
    let e = Ensemble::new(mats)?;
    let v = random_unitary(n, RngSeed(base_seed + 1000 * t + 500), symmetric);
    let r_random = stationarity_residual(&v, &e)?;

    let solver_cfg = SolverConfig {
        rel_tol: 0.0,
        ..SolverConfig::default()
    };
    let minimizer = jacobi_minimize(&e, &solver_cfg)?;
    let r_min = stationarity_residual(&minimizer.v, &e)?;

    let setup = random_setup(
        n,
        m,
        RngSeed(base_seed + 1000 * t + 700),
        lambda,
        a,
        (0, 1),
        false,
    );
    let params = CenteredParams::from_setup(&setup);
    let skew = {
        let g = random_gaussian(n, n, RngSeed(base_seed + 1000 * t + 800), false);
        let s = g.sub(&g.adjoint()).scale_re(0.5);
        s.scale_re(1.0 / s.fro_norm())
    };
    let remainder = |l: f64| -> Result<f64, JdError> {
        let v = Mat::identity(n).add(&skew.scale_re(l));
        let exact = s_map(&v, &params.ensemble_at(l)?)?;
        let approx = s_first_order(&skew, &params, l)?;
        fro_dist(&exact, &approx)
    };
    let halving_ratio = remainder(lambda)? / remainder(lambda / 2.0)?;
    Ok(Trial {
        r_random,
        r_min,
        halving_ratio,
    })
}

fn cmd_stationarity(args: StationarityArgs) -> Result<u8, Failure> {
    let cfg: StationarityConfig = load_config(&args.config)?;
    let trials = args.trials.or(cfg.trials).unwrap_or(20);
    let seed = resolve_seed(args.seed, cfg.seed);
    let n = args.n.or(cfg.n).unwrap_or(4);
    let m = args.m.or(cfg.m).unwrap_or(3);
    let symmetric = args.symmetric || cfg.symmetric.unwrap_or(false);
    let lambda = args.lambda.or(cfg.lambda).unwrap_or(1e-3);
    let a = parse_complex(args.a.or(cfg.a).as_deref().unwrap_or("0"))?;
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(1);

    let run = |t: u64| run_trial(seed, t, n, m, symmetric, lambda, a);
    let results: Vec<Trial> = if jobs <= 1 {
        (0..trials as u64)
            .map(run)
            .collect::<Result<Vec<_>, _>>()?
    } else {
        use rayon::prelude::*;
        thread_pool(jobs)?.install(|| {
            (0..trials as u64)
                .into_par_iter()
                .map(run)
                .collect::<Result<Vec<_>, _>>()
        })?
    };

    for (t, trial) in results.iter().enumerate() {
        println!(
            "trial {t}: residual(random V) = {:.15e}, residual(minimizer) = {:.15e}, halving ratio = {:.15e}",
            trial.r_random, trial.r_min, trial.halving_ratio
        );
    }
    let mut ratios: Vec<f64> = results.iter().map(|t| t.halving_ratio).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if ratios.len() % 2 == 1 {
        ratios[ratios.len() / 2]
    } else {
        0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2])
    };
    let worst_min = results.iter().map(|t| t.r_min).fold(0.0f64, f64::max);
    println!("max residual at minimizers = {worst_min:.15e}");
    println!("median halving ratio = {median:.15e}");

    if let Some(path) = args.out.or(cfg.out) {
        let rows: Vec<serde_json::Value> = results
            .iter()
            .map(|t| {
                json!({
                    "residual_random": t.r_random,
                    "residual_minimizer": t.r_min,
                    "halving_ratio": t.halving_ratio,
                })
            })
            .collect();
        let report = json!({
            "trials": rows,
            "max_residual_minimizer": worst_min,
            "median_halving_ratio": median,
        });
        let mut text = serde_json::to_string(&report)?;
        text.push('\n');
        fs::write(path, text)?;
    }
    Ok(0)
}

fn cmd_transvect(args: TransvectArgs) -> Result<u8, Failure> {
    let b = match (&args.input, args.random_sl) {
        (Some(path), None) => serde_json::from_str::<Mat>(&fs::read_to_string(path)?)?,
        (None, Some(n)) => {
            let seed = resolve_seed(args.seed, None);
            random_sl(n, RngSeed(seed), args.real)
        }
        _ => return Err(Failure::usage("exactly one of --in or --random-sl required")),
    };
    let factors = decompose_transvections(&b, 1e-8)?;
    let n = b.n_rows();
    let rebuilt = transvection_product(n, &factors)?;
    let error = fro_dist(&rebuilt, &b)?;
    println!("{} factors, reconstruction error = {error:.15e}", factors.len());

    if let Some(path) = args.out {
        let list: Vec<serde_json::Value> = factors
            .iter()
            .map(|t| json!({ "i": t.i + 1, "j": t.j + 1, "a": [t.a.re, t.a.im] }))
            .collect();
        let doc = json!({ "n": n, "factors": list });
        let mut text = serde_json::to_string(&doc)?;
        text.push('\n');
        fs::write(path, text)?;
    }
    Ok(0)
}
