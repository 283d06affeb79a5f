//! Command-line front end.
//!
//! Output formats:
//! * `reduce`: JSON object with `config`, `n`, `p` (absent when the input was
//!   already reduced), `lambdas`, `mults`, `s`, `ratio_x`, `t_stat`. Accepted
//!   back by `pl` and `interval` through `--reduction`.
//! * `pl`: a `# config: <json>` line, then CSV with header `rho,pl`. A point
//!   whose evaluation failed has an empty `pl` field.
//! * `interval`: JSON object with `config`, `alpha`, `lower`, `upper`,
//!   `psi_lower`, `psi_upper`, `multimodal_flag`, `empty`, `grid_failures`.
//!   Bounds are `null` when the region is empty.
//! * `simulate`: the study result as JSON.
//! * `check`: JSON report of the oracle suite.
//!
//! Floats are written in shortest round-trip form. Exit codes: 0 success,
//! 1 usage or configuration, 2 data, 3 numerical failure.

pub mod load;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::conditional_law::LawOptions;
use crate::error::{Error, Result};
use crate::model_reduction::{EigenReduction, Eigenstructure, ModelReducer};
use crate::plausibility::{interval, pl_curve, GridSpec, PlOptions, DEFAULT_REFINE_TOL};
use crate::sim_harness::oracles::{closed_form_two_strata, density_ks, invariance_check};
use crate::sim_harness::{run_study, Design, SimConfig, STUDY_GRID_POINTS, STUDY_REFINE_TOL};

use load::{load_eigen, load_general, load_oneway, parse_list, parse_sizes, ASource};

/// Environment variable that overrides the worker count of `simulate`.
pub const THREADS_ENV: &str = "VC_IM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "vcim",
    version,
    about = "Plausibility functions and intervals for heritability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reduce a data set to its eigenstructure and sufficient statistics.
    Reduce(ReduceArgs),
    /// Plausibility curve on a grid of heritability values.
    Pl(PlArgs),
    /// Plausibility interval at level alpha.
    Interval(IntervalArgs),
    /// Coverage study on synthetic data.
    Simulate(SimulateArgs),
    /// Run the oracle diagnostics.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// One-way data: CSV with header `group,value`.
    #[arg(long, value_name = "CSV")]
    data: Option<PathBuf>,
    /// Response vector (headerless CSV).
    #[arg(long, value_name = "CSV", requires_all = ["x", "z"])]
    y: Option<PathBuf>,
    /// Fixed-effect design matrix.
    #[arg(long, value_name = "CSV")]
    x: Option<PathBuf>,
    /// Random-effect design matrix.
    #[arg(long, value_name = "CSV")]
    z: Option<PathBuf>,
    /// Relationship matrix file, or `identity`.
    #[arg(long, value_name = "CSV|identity", default_value = "identity")]
    a: String,
    /// Output of `vcim reduce`.
    #[arg(long, value_name = "JSON")]
    reduction: Option<PathBuf>,
    /// Eigenstructure `lambda:mult,...` or a file holding it; needs --stats.
    #[arg(long, value_name = "SPEC", requires = "stats")]
    eigen: Option<String>,
    /// Sufficient statistics S_1,...,S_L matching --eigen.
    #[arg(long, value_name = "LIST")]
    stats: Option<String>,
    /// Absolute eigenvalue clustering tolerance (default 1e-8 * largest eigenvalue).
    #[arg(long)]
    cluster_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct LawArgs {
    /// Relative tolerance of the conditional-law quadrature.
    #[arg(long, default_value_t = LawOptions::default().quad_tol)]
    quad_tol: f64,
    /// Tolerance of the interpolated conditional CDF.
    #[arg(long, default_value_t = LawOptions::default().cdf_tol)]
    cdf_tol: f64,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    law: LawArgs,
    /// Grid `min:max:points`.
    #[arg(long, default_value = "0:0.9999:400")]
    grid: String,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IntervalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    law: LawArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "0:0.9999:400")]
    grid: String,
    /// Bisection tolerance for the interval end points.
    #[arg(long, default_value_t = DEFAULT_REFINE_TOL)]
    refine_tol: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// One-way group sizes, e.g. `2,4,4,5`.
    #[arg(long, conflicts_with = "eigen", required_unless_present = "eigen")]
    pattern: Option<String>,
    /// Eigenstructure for direct draws of the sufficient statistics.
    #[arg(long)]
    eigen: Option<String>,
    #[arg(long)]
    sigma_a2: f64,
    #[arg(long)]
    sigma_e2: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = STUDY_REFINE_TOL)]
    refine_tol: f64,
    #[command(flatten)]
    law: LawArgs,
    /// Worker threads; VC_IM_THREADS takes precedence when set.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Monte Carlo draws per density check.
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random instances for the invariance check.
    #[arg(long, default_value_t = 20)]
    instances: usize,
    /// Significance level of the KS tests.
    #[arg(long, default_value_t = 0.01)]
    level: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Settings echoed into every output.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdf_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfig {
    fn with_law(mut self, law: &LawOptions) -> Self {
        self.quad_tol = Some(law.quad_tol);
        self.cdf_tol = Some(law.cdf_tol);
        self
    }
}

#[derive(Debug, Serialize)]
struct ReduceOutput<'a> {
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    #[serde(flatten)]
    reduction: &'a EigenReduction,
}

#[derive(Debug, Deserialize)]
struct ReductionFile {
    lambdas: Vec<f64>,
    mults: Vec<usize>,
    s: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct IntervalOutput<'a> {
    config: &'a RunConfig,
    alpha: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    psi_lower: Option<f64>,
    psi_upper: Option<f64>,
    multimodal_flag: bool,
    empty: bool,
    grid_failures: usize,
}

struct Loaded {
    reduction: EigenReduction,
    n: Option<usize>,
    p: Option<usize>,
}

fn law_options(args: &LawArgs) -> Result<LawOptions> {
    let o = LawOptions {
        quad_tol: args.quad_tol,
        cdf_tol: args.cdf_tol,
    };
    o.validate()?;
    Ok(o)
}

fn load_input(input: &InputArgs, cfg: &mut RunConfig) -> Result<Loaded> {
    let given = [
        input.data.is_some(),
        input.y.is_some(),
        input.reduction.is_some(),
        input.eigen.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if given != 1 {
        return Err(Error::Config(
            "give exactly one input: --data, --y/--x/--z, --reduction, or --eigen with --stats".into(),
        ));
    }
    if let Some(tol) = input.cluster_tol {
        if !(tol > 0.0) {
            return Err(Error::Config("cluster_tol must be positive".into()));
        }
    }
    cfg.cluster_tol = input.cluster_tol;
    let from_model = |model: crate::model_reduction::MixedModelSpec| -> Result<Loaded> {
        let reduction = ModelReducer::for_model(&model, input.cluster_tol)?.reduce(&model.y)?;
        Ok(Loaded {
            reduction,
            n: Some(model.n()),
            p: Some(model.p()),
        })
    };
    if let Some(path) = &input.data {
        cfg.design = Some("oneway".into());
        cfg.inputs = vec![path.display().to_string()];
        return from_model(load_oneway(path)?);
    }
    if let (Some(y), Some(x), Some(z)) = (&input.y, &input.x, &input.z) {
        cfg.design = Some("general".into());
        cfg.inputs = vec![
            y.display().to_string(),
            x.display().to_string(),
            z.display().to_string(),
            input.a.clone(),
        ];
        return from_model(load_general(y, x, z, ASource::from_arg(&input.a))?);
    }
    if let Some(path) = &input.reduction {
        cfg.design = Some("reduction".into());
        cfg.inputs = vec![path.display().to_string()];
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: ReductionFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            msg: format!("{}: {e}", path.display()),
        })?;
        let eigen = Eigenstructure::new(file.lambdas, file.mults)?;
        return Ok(Loaded {
            reduction: EigenReduction::from_stats(&eigen, file.s)?,
            n: None,
            p: None,
        });
    }
    if let (Some(spec), Some(stats)) = (&input.eigen, &input.stats) {
        cfg.design = Some("eigen".into());
        cfg.inputs = vec![spec.clone(), stats.clone()];
        let eigen = load_eigen(spec)?;
        let s = parse_list(stats, "--stats")?;
        return Ok(Loaded {
            reduction: EigenReduction::from_stats(&eigen, s)?,
            n: None,
            p: None,
        });
    }
    Err(Error::Config("--y needs --x and --z".into()))
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        }),
        None => out.write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Numerical(format!("serialization: {e}")))
}

fn cmd_reduce(args: &ReduceArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = RunConfig {
        command: "reduce".into(),
        ..Default::default()
    };
    let loaded = load_input(&args.input, &mut cfg)?;
    let text = to_json(&ReduceOutput {
        config: &cfg,
        n: loaded.n,
        p: loaded.p,
        reduction: &loaded.reduction,
    })?;
    write_output(args.output.as_deref(), &text, out)
}

/// `rho,pl` CSV body for a curve.
pub fn curve_csv(config: &RunConfig, rho: &[f64], pl: &[Option<f64>]) -> Result<String> {
    let echo = serde_json::to_string(config).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Numerical(format!("csv: {e}"));
    w.write_record(["rho", "pl"]).map_err(fail)?;
    for (r, p) in rho.iter().zip(pl) {
        let p = p.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([r.to_string(), p]).map_err(fail)?;
    }
    let body = w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    Ok(format!("# config: {echo}\n{}", String::from_utf8_lossy(&body)))
}

fn cmd_pl(args: &PlArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let grid = GridSpec::parse(&args.grid)?;
    let law = law_options(&args.law)?;
    let mut cfg = RunConfig {
        command: "pl".into(),
        grid: Some(grid),
        ..Default::default()
    }
    .with_law(&law);
    let loaded = load_input(&args.input, &mut cfg)?;
    let opts = PlOptions {
        law,
        ..Default::default()
    };
    let res = pl_curve(&loaded.reduction, &grid, &opts)?;
    if res.failures() == res.grid.len() {
        return Err(Error::Numerical("plausibility failed at every grid point".into()));
    }
    for d in res.diagnostics.iter().filter(|d| !d.ok) {
        let _ = writeln!(err, "warning: rho = {}: {}", d.rho, d.error.as_deref().unwrap_or(""));
    }
    write_output(args.output.as_deref(), &curve_csv(&cfg, &res.grid, &res.pl)?, out)
}

fn cmd_interval(args: &IntervalArgs, out: &mut dyn Write) -> Result<()> {
    let grid = GridSpec::parse(&args.grid)?;
    let law = law_options(&args.law)?;
    let mut cfg = RunConfig {
        command: "interval".into(),
        grid: Some(grid),
        alpha: Some(args.alpha),
        refine_tol: Some(args.refine_tol),
        ..Default::default()
    }
    .with_law(&law);
    let loaded = load_input(&args.input, &mut cfg)?;
    let opts = PlOptions {
        law,
        ..Default::default()
    };
    let res = interval(&loaded.reduction, args.alpha, &grid, args.refine_tol, &opts)?;
    let iv = res.interval;
    let text = to_json(&IntervalOutput {
        config: &cfg,
        alpha: args.alpha,
        lower: iv.map(|i| i.lower),
        upper: iv.map(|i| i.upper),
        psi_lower: iv.map(|i| i.psi_lower),
        psi_upper: iv.map(|i| i.psi_upper),
        multimodal_flag: res.multimodal,
        empty: res.empty,
        grid_failures: res.failures(),
    })?;
    write_output(args.output.as_deref(), &text, out)
}

fn threads_setting(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} = '{v}' is not a positive integer"))),
        _ => Ok(flag),
    }
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let design = match (&args.pattern, &args.eigen) {
        (Some(p), None) => Design::Oneway { sizes: parse_sizes(p)? },
        (None, Some(e)) => {
            let e = load_eigen(e)?;
            Design::Eigen {
                lambdas: e.lambdas,
                mults: e.mults,
            }
        }
        _ => return Err(Error::Config("give exactly one of --pattern and --eigen".into())),
    };
    let mut cfg = SimConfig::new(design, args.sigma_a2, args.sigma_e2, args.reps);
    cfg.alpha = args.alpha;
    cfg.seed = args.seed;
    cfg.grid = match &args.grid {
        Some(g) => GridSpec::parse(g)?,
        None => GridSpec {
            points: STUDY_GRID_POINTS,
            ..Default::default()
        },
    };
    cfg.refine_tol = args.refine_tol;
    cfg.quad_tol = args.law.quad_tol;
    cfg.cdf_tol = args.law.cdf_tol;
    cfg.threads = threads_setting(args.threads)?;
    let result = run_study(&cfg)?;
    write_output(args.output.as_deref(), &to_json(&result)?, out)
}

#[derive(Debug, Serialize)]
struct CheckItem {
    name: String,
    passed: bool,
    detail: serde_json::Value,
}

fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<bool> {
    if args.draws < 100 {
        return Err(Error::Config("--draws must be at least 100".into()));
    }
    let law = LawOptions::default();
    let mut items = Vec::new();
    let value = |v: serde_json::Result<serde_json::Value>| v.unwrap_or(serde_json::Value::Null);
    for (r1, r2) in [(2, 4), (1, 10), (5, 37)] {
        let rep = closed_form_two_strata(r1, r2, &law)?;
        items.push(CheckItem {
            name: format!("closed_form_{r1}_{r2}"),
            passed: rep.cdf_sup_error < 1e-6 && rep.mu_error < 1e-6,
            detail: value(serde_json::to_value(rep)),
        });
    }
    let density_cases: [(&str, &[usize], &[f64]); 5] = [
        ("density_1_1_10_w1", &[1, 1, 10], &[1.0, 0.0]),
        ("density_1_1_10_w2", &[1, 1, 10], &[0.0, 1.0]),
        ("density_1_1_10_sum", &[1, 1, 10], &[1.0, 1.0]),
        ("density_2_1_3_9_w1", &[2, 1, 3, 9], &[1.0, 0.0, 0.0]),
        ("density_2_1_3_9_sum", &[2, 1, 3, 9], &[1.0, 1.0, 1.0]),
    ];
    for (i, (name, mults, coeffs)) in density_cases.iter().enumerate() {
        let ks = density_ks(mults, coeffs, args.draws, args.seed.wrapping_add(i as u64))?;
        items.push(CheckItem {
            name: name.to_string(),
            passed: ks.passes(args.level),
            detail: value(serde_json::to_value(ks)),
        });
    }
    let inv = invariance_check(args.instances, args.seed, &PlOptions::default())?;
    items.push(CheckItem {
        name: "invariance".into(),
        passed: inv.max() < 1e-8,
        detail: value(serde_json::to_value(inv)),
    });
    let all = items.iter().all(|i| i.passed);
    let text = to_json(&serde_json::json!({
        "config": RunConfig {
            command: "check".into(),
            seed: Some(args.seed),
            ..Default::default()
        }.with_law(&law),
        "draws": args.draws,
        "level": args.level,
        "passed": all,
        "checks": items,
    }))?;
    write_output(args.output.as_deref(), &text, out)?;
    Ok(all)
}

/// Parse `argv` (including the program name), run the command, and return
/// the process exit code. Errors are reported on `err`.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Reduce(a) => cmd_reduce(a, out),
        Command::Pl(a) => cmd_pl(a, out, err),
        Command::Interval(a) => cmd_interval(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Check(a) => match cmd_check(a, out) {
            Ok(true) => Ok(()),
            Ok(false) => {
                let _ = writeln!(err, "error: oracle checks failed");
                return 3;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli_with(std::iter::once("vcim").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(&[]).0, 1);
        assert_eq!(run(&["frobnicate"]).0, 1);
        assert_eq!(run(&["pl", "--eigen", "2:1,0:3"]).0, 1);
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn eigen_input_reduce_echo() {
        let (code, out, _) = run(&["reduce", "--eigen", "4.55:1,1:1,0:10", "--stats", "12,3,10"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["mults"], serde_json::json!([1, 1, 10]));
        assert_eq!(v["config"]["design"], "eigen");
        assert!(v.get("n").is_none());
    }

    #[test]
    fn pl_rows_and_range() {
        let (code, out, _) = run(&[
            "pl",
            "--eigen",
            "4.55:1,1:1,0:10",
            "--stats",
            "12,3,10",
            "--grid",
            "0:0.9:10",
        ]);
        assert_eq!(code, 0);
        let mut lines = out.lines();
        assert!(lines.next().unwrap().starts_with("# config: {"));
        assert_eq!(lines.next().unwrap(), "rho,pl");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 10);
        for r in rows {
            let pl: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
            assert!((0.0..=1.0).contains(&pl));
        }
    }

    #[test]
    fn data_errors_exit_two() {
        let (code, _, err) = run(&["pl", "--eigen", "0:5", "--stats", "1"]);
        assert_eq!(code, 2, "{err}");
        let (code, _, _) = run(&["reduce", "--data", "/nonexistent/file.csv"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn config_errors_exit_one() {
        let (code, _, _) = run(&["pl", "--eigen", "2:1,0:3", "--stats", "1,2", "--grid", "0:1.5:10"]);
        assert_eq!(code, 1);
        let (code, _, _) = run(&["interval", "--eigen", "2:1,0:3", "--stats", "1,2", "--alpha", "1.5"]);
        assert_eq!(code, 1);
        let (code, _, _) = run(&["reduce"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn threads_flag_used_without_env() {
        if std::env::var(THREADS_ENV).is_err() {
            assert_eq!(threads_setting(Some(3)).unwrap(), Some(3));
            assert_eq!(threads_setting(None).unwrap(), None);
        }
    }
}
