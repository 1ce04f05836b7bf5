//! `ar-bridge`: simulate AR/MA processes, select autoregressive orders, draw
//! penalty curves, run Monte Carlo studies and prequential evaluations.
//!
//! Exit status is 0 on success, 1 on usage or config errors and 2 on data or
//! domain errors. Failures are reported on stderr as one line of JSON:
//! `{"code": ..., "message": ..., "context": {...}}`.

mod error;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ar_bridge::criteria::{
    auto_params, bc_calibration_level, bic_significance_level, default_m_n, discrete_tangent_points, integer_cbrt, parse_criteria,
    penalty_curves, select, tangent_points, underfit_threshold, underfit_threshold_approx, Criterion, CriterionParams, DEFAULT_HQ_C,
    DEFAULT_ZETA,
};
use ar_bridge::experiments::{run_study, ExperimentConfig};
use ar_bridge::fit::{fit_all_orders, sample_moments};
use ar_bridge::numerics::RngStream;
use ar_bridge::prequential::{demean, deseason, normalize_against_best, run_prequential, PrequentialConfig, WindowMode};
use ar_bridge::process::{Filter, ProcessSpec, ResolvedProcess};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// Environment variable that, when set, replaces any `--seed`.
const SEED_ENV: &str = "AR_BRIDGE_SEED";

const FILTER_CONVENTION: &str = "psi: x_n + sum_l psi_l x_{n-l} = e_n";
const CONVENTIONAL_CONVENTION: &str = "phi: x_n = sum_l phi_l x_{n-l} + e_n";

#[derive(Parser)]
#[command(name = "ar-bridge", version, about = "Autoregressive order selection toolkit")]
struct Cli {
    /// Emit machine-readable JSON instead of CSV/text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a process and write one numeric column.
    Simulate(SimulateArgs),
    /// Fit all candidate orders and report each criterion's choice.
    Select(SelectArgs),
    /// Penalty curves of BC, AIC, BIC and HQ.
    Curves(CurvesArgs),
    /// Run a Monte Carlo study from a config file.
    Mc(McArgs),
    /// One-step-ahead prequential evaluation.
    Preq(PreqArgs),
    /// BIC significance level and underfitting thresholds.
    Thresholds(ThresholdsArgs),
    /// Demean or deseasonalize a series.
    Preprocess(PreprocessArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Select(_) => "select",
            Command::Curves(_) => "curves",
            Command::Mc(_) => "mc",
            Command::Preq(_) => "preq",
            Command::Thresholds(_) => "thresholds",
            Command::Preprocess(_) => "preprocess",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sign {
    /// `x_n + sum psi_l x_{n-l} = e_n`
    Filter,
    /// `x_n = sum phi_l x_{n-l} + e_n`
    Conventional,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV (`-` for stdin).
    #[arg(long)]
    data: String,
    /// Column name or zero-based index for multi-column files.
    #[arg(long)]
    col: Option<String>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["spec", "ar", "ma1"])))]
struct SimulateArgs {
    /// Process spec file (JSON if `.json`, TOML otherwise).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated AR coefficients.
    #[arg(long, allow_hyphen_values = true)]
    ar: Option<String>,
    /// MA(1) parameter theta in `x_n = e_n + theta e_{n-1}`.
    #[arg(long, allow_hyphen_values = true)]
    ma1: Option<f64>,
    /// Sign convention of `--ar`.
    #[arg(long, value_enum, default_value = "filter")]
    sign: Sign,
    /// Innovation variance for `--ar` and `--ma1`.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: DataArgs,
    #[arg(long, default_value = "bc,aic,bic,hq")]
    criteria: String,
    /// Largest candidate order, or `auto`.
    #[arg(long, default_value = "auto")]
    lmax: String,
    /// BC scale `M_N`, or `auto` for `(ln N)^0.9`.
    #[arg(long, default_value = "auto")]
    mn: String,
    #[arg(long, default_value_t = DEFAULT_ZETA)]
    zeta: f64,
    #[arg(long = "hq-c", default_value_t = DEFAULT_HQ_C)]
    hq_c: f64,
    /// Subtract the sample mean first.
    #[arg(long)]
    demean: bool,
    /// Also print full score vectors.
    #[arg(long)]
    scores: bool,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    n: usize,
    /// Largest order; defaults to the integer cube root of N.
    #[arg(long)]
    lmax: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_HQ_C)]
    c: f64,
    /// Shift each curve to zero at L = 1.
    #[arg(long)]
    shifted: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV report path; the JSON report goes next to it with a `.json` extension.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PreqArgs {
    #[command(flatten)]
    input: DataArgs,
    #[arg(long)]
    n0: usize,
    #[arg(long, default_value = "expanding")]
    mode: String,
    /// Sliding training width (defaults to n0).
    #[arg(long)]
    window: Option<usize>,
    #[arg(long = "avg-window", default_value_t = 100)]
    avg_window: usize,
    #[arg(long, default_value = "bc,aic,bic")]
    criteria: String,
    #[arg(long)]
    demean: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdsArgs {
    #[arg(long)]
    n: usize,
    /// Largest order; defaults to the integer cube root of N.
    #[arg(long)]
    lmax: Option<usize>,
    /// Probability level for the h_L table; defaults to the BC calibration level.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("transform").required(true).args(["demean", "deseason"])))]
struct PreprocessArgs {
    #[command(flatten)]
    input: DataArgs,
    #[arg(long)]
    demean: bool,
    /// Subtract per-phase means for this period.
    #[arg(long)]
    deseason: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_string()).to_json(None));
            return ExitCode::from(1);
        }
    };
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json(Some(name)));
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let json = cli.json;
    match cli.command {
        Command::Simulate(a) => simulate(a, json),
        Command::Select(a) => select_cmd(a, json),
        Command::Curves(a) => curves(a, json),
        Command::Mc(a) => mc(a, json),
        Command::Preq(a) => preq(a, json),
        Command::Thresholds(a) => thresholds(a, json),
        Command::Preprocess(a) => preprocess(a, json),
    }
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Coefficients in both sign conventions, labelled.
fn filter_json(f: &Filter) -> Value {
    json!({
        "order": f.order(),
        "noise_variance": f.noise_variance(),
        "psi": f.coeffs(),
        "phi": f.conventional_coeffs(),
        "conventions": { "psi": FILTER_CONVENTION, "phi": CONVENTIONAL_CONVENTION },
    })
}

fn parse_coeffs(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|_| CliError::Usage(format!("cannot parse coefficient `{t}`")))
        })
        .collect()
}

fn load_spec(path: &Path) -> CliResult<ProcessSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.message().to_string())
    };
    parsed.map_err(|m| ar_bridge::Error::Config(format!("{}: {m}", path.display())).into())
}

fn simulate(a: SimulateArgs, json: bool) -> CliResult<()> {
    let spec = if let Some(path) = &a.spec {
        load_spec(path)?
    } else if let Some(ar) = &a.ar {
        let mut coeffs = parse_coeffs(ar)?;
        if a.sign == Sign::Conventional {
            coeffs.iter_mut().for_each(|c| *c = -*c);
        }
        ProcessSpec::finite_ar(coeffs, a.sigma2)?
    } else {
        ProcessSpec::ma1(a.ma1.expect("clap enforces one source"), a.sigma2)?
    };
    let seed = env_seed()?.unwrap_or(a.seed);
    let mut rng = RngStream::new(seed, 0);
    let data = spec.simulate(a.n, a.burnin, &mut rng)?;

    let resolved = match spec.resolve(Some(a.n))? {
        ResolvedProcess::Ar(f) => filter_json(&f),
        ResolvedProcess::Ma1 { theta, noise_variance } => json!({ "theta": theta, "noise_variance": noise_variance }),
    };
    let provenance = json!({ "spec": spec, "resolved": resolved, "n": a.n, "seed": seed, "burnin": a.burnin });
    eprintln!("{provenance}");

    if json {
        io::emit(a.out.as_deref(), &pretty(&json!({ "provenance": provenance, "x": data })))
    } else {
        io::emit(a.out.as_deref(), &io::series_csv(&data))
    }
}

fn load_input(d: &DataArgs, demean_first: bool) -> CliResult<Vec<f64>> {
    let data = io::read_series(&d.data, d.col.as_deref())?;
    Ok(if demean_first { demean(&data) } else { data })
}

fn select_cmd(a: SelectArgs, json: bool) -> CliResult<()> {
    let data = load_input(&a.input, a.demean)?;
    let n0 = data.len();
    let criteria = parse_criteria(&a.criteria).map_err(|e| CliError::Usage(e.to_string()))?;
    let (l_max, n) = match a.lmax.as_str() {
        "auto" => {
            let (p, n) = auto_params(n0)?;
            (p.l_max, n)
        }
        s => {
            let l: usize = s.parse().map_err(|_| CliError::Usage(format!("--lmax must be `auto` or an integer, got `{s}`")))?;
            if l == 0 {
                return Err(ar_bridge::Error::Domain("--lmax must be at least 1".into()).into());
            }
            if n0 < l + 2 {
                return Err(ar_bridge::Error::InsufficientData { needed: l + 2, got: n0 }.into());
            }
            (l, n0 - l)
        }
    };
    let m_n = match a.mn.as_str() {
        "auto" => default_m_n(n),
        s => s.parse().map_err(|_| CliError::Usage(format!("--mn must be `auto` or a number, got `{s}`")))?,
    };
    let params = CriterionParams::new(l_max, m_n, a.hq_c, a.zeta)?;
    let moments = sample_moments(&data, l_max)?;
    let table = fit_all_orders(&moments)?;
    let result = select(&table, moments.n, &criteria, &params)?;
    if result.degenerate {
        eprintln!("{}", json!({ "warning": "degenerate fit: residual error hit the numerical floor" }));
    }

    if json {
        let models: serde_json::Map<String, Value> =
            criteria.iter().map(|&c| (c.id().to_string(), filter_json(table.filter(result.chosen[&c])))).collect();
        let doc = json!({ "n0": n0, "selection": result, "models": models });
        return io::emit(None, &pretty(&doc));
    }

    let mut out = format!(
        "n0 = {n0}\nN = {}\nL_max = {}\nM_N = {}\nzeta = {}\nhq_c = {}\n",
        result.n, params.l_max, params.m_n, params.zeta, params.hq_c
    );
    out.push_str(&format!("sign convention: {FILTER_CONVENTION}; {CONVENTIONAL_CONVENTION}\n"));
    out.push_str("criterion,order,psi,phi\n");
    for &c in &criteria {
        let f = table.filter(result.chosen[&c]);
        out.push_str(&format!("{},{},{},{}\n", c.id(), f.order(), join(f.coeffs()), join(&f.conventional_coeffs())));
    }
    out.push_str(&format!("PI = {}\n", result.pi));
    if a.scores {
        out.push_str(&format!("score_L0 = {}\n", result.order0_score));
        for (c, s) in &result.scores {
            out.push_str(&format!("scores_{} = {}\n", c.id(), join(s)));
        }
    }
    io::emit(None, &out)
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

fn curves(a: CurvesArgs, json: bool) -> CliResult<()> {
    let l_max = a.lmax.unwrap_or_else(|| integer_cbrt(a.n));
    let curves = penalty_curves(a.n, l_max, a.c)?;
    if json {
        let doc = json!({
            "curves": curves,
            "tangent_points": tangent_points(a.n, l_max, a.c)?,
            "discrete_tangent_points": discrete_tangent_points(a.n, l_max, a.c)?,
        });
        io::emit(a.out.as_deref(), &pretty(&doc))
    } else {
        io::emit(a.out.as_deref(), &curves.to_csv(a.shifted))
    }
}

fn mc(a: McArgs, json: bool) -> CliResult<()> {
    let mut config = ExperimentConfig::from_path(&a.config)?;
    if let Some(seed) = env_seed()?.or(a.seed) {
        config.master_seed = seed;
    }
    let report = run_study(&config, a.threads.map(|t| t as usize))?;
    let csv = report.to_csv();
    let doc = report.to_json();
    match &a.out {
        Some(path) => {
            let json_path = path.with_extension("json");
            io::write_atomic(path, &csv)?;
            io::write_atomic(&json_path, &doc)?;
            let summary = json!({
                "csv": path.display().to_string(),
                "json": json_path.display().to_string(),
                "master_seed": report.master_seed,
                "wall_time_secs": report.wall_time_secs,
            });
            if json {
                io::emit(None, &pretty(&summary))
            } else {
                io::emit(None, &format!("wrote {} and {}\n", path.display(), json_path.display()))
            }
        }
        None if json => io::emit(None, &doc),
        None => io::emit(None, &csv),
    }
}

fn preq(a: PreqArgs, json: bool) -> CliResult<()> {
    let data = load_input(&a.input, a.demean)?;
    let mode: WindowMode = a.mode.parse().map_err(|e: ar_bridge::Error| CliError::Usage(e.to_string()))?;
    let mut config = PrequentialConfig::new(a.n0, mode);
    config.window = a.window;
    config.avg_window = a.avg_window;
    config.criteria = parse_criteria(&a.criteria).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut series = run_prequential(&data, &config)?;
    if config.criteria.contains(&Criterion::Aic) && config.criteria.contains(&Criterion::Bic) {
        series = normalize_against_best(&series)?;
    }
    if json {
        let doc = serde_json::to_value(&series).expect("prequential series serializes");
        io::emit(a.out.as_deref(), &pretty(&doc))
    } else {
        io::emit(a.out.as_deref(), &series.to_csv())
    }
}

fn thresholds(a: ThresholdsArgs, json: bool) -> CliResult<()> {
    let l_max = a.lmax.unwrap_or_else(|| integer_cbrt(a.n));
    let q = bic_significance_level(a.n)?;
    let calibration = bc_calibration_level(a.n, l_max)?;
    let p = a.p.unwrap_or(calibration);
    let rows = (1..=l_max)
        .map(|l| Ok((l, underfit_threshold(l, p)?, underfit_threshold_approx(l, p)?)))
        .collect::<ar_bridge::Result<Vec<_>>>()?;
    if json {
        let table: Vec<Value> = rows.iter().map(|(l, h, ha)| json!({ "l": l, "h_exact": h, "h_approx": ha })).collect();
        let doc = json!({ "n": a.n, "l_max": l_max, "bic_q": q, "bc_calibration_p": calibration, "p": p, "h": table });
        return io::emit(None, &pretty(&doc));
    }
    let mut out = format!("n = {}\nl_max = {l_max}\nbic_q = {q}\nbc_calibration_p = {calibration}\np = {p}\nL,h_exact,h_approx\n", a.n);
    for (l, h, ha) in rows {
        out.push_str(&format!("{l},{h},{ha}\n"));
    }
    io::emit(None, &out)
}

fn preprocess(a: PreprocessArgs, json: bool) -> CliResult<()> {
    let data = io::read_series(&a.input.data, a.input.col.as_deref())?;
    let (label, out) = match a.deseason {
        Some(period) => (format!("deseason:{period}"), deseason(&data, period)?),
        None => ("demean".to_string(), demean(&data)),
    };
    if json {
        io::emit(a.out.as_deref(), &pretty(&json!({ "transform": label, "x": out })))
    } else {
        io::emit(a.out.as_deref(), &io::series_csv(&out))
    }
}
