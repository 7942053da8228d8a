//! Batch front end: simulate slices, estimate H, run Monte-Carlo experiments,
//! print limit-theorem constants, and run the distributional checks.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use fracwave::estimators::{estimate_bar_from_s, estimate_hat_from_s, estimate_tilde_from_s};
use fracwave::experiments::{Table1Report, TABLE1_SEED};
use fracwave::limits::{
    cumulant_finite_n, cumulant_limit, exact_variance_chaos, vn_noncentral_check,
};
use fracwave::variations::empirical_abs_moment_values;
use fracwave::{
    clt_diagnostic, limit_constants, noncentral_diagnostic, run_mc, sample_slice, table1_preset,
    CellSpec, Error as CoreError, EstimateResult, ExperimentConfig, ExperimentReport, Filter,
    Method, WaveModel,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "fracwave",
    about = "Wave-equation slice simulation, k-variations and Hurst estimation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one spatial slice and write it as CSV (x,value) or JSON.
    Simulate(SimulateArgs),
    /// Estimate H from a slice (read from CSV or freshly simulated).
    Estimate(EstimateArgs),
    /// Monte-Carlo estimator benchmark; `--preset paper-table-1` runs the
    /// published benchmark grid.
    Experiment(ExperimentArgs),
    /// Print limit-theorem constants as JSON.
    Constants(ConstantsArgs),
    /// Distribution check of sqrt(N-l) V_N against its normal limit.
    CltCheck(CltArgs),
    /// Cumulant check of V_N / sqrt(v_N) in the non-central regime.
    NoncentralCheck(NoncentralArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Hat,
    Bar,
    Tilde,
}

impl EstimatorArg {
    fn method(self) -> Method {
        match self {
            EstimatorArg::Hat => Method::Hat,
            EstimatorArg::Bar => Method::Bar,
            EstimatorArg::Tilde => Method::Tilde,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// Hurst parameter in (0.5, 1).
    #[arg(long = "h")]
    h: f64,
    /// Observation time t > 1.
    #[arg(long = "t", default_value_t = 3.0)]
    t: f64,
    /// Grid size N (N + 1 points on [0, 1]).
    #[arg(long = "n")]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EstimateArgs {
    /// Slice CSV to read (two columns x,value; header optional). When absent
    /// a slice is simulated from --h/--t/--n/--seed.
    #[arg(long)]
    input: Option<String>,
    /// True H used only when simulating the input slice.
    #[arg(long = "h")]
    h: Option<f64>,
    /// Observation time; required by the hat/bar estimators.
    #[arg(long = "t", default_value_t = 3.0)]
    t: f64,
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Variation order k.
    #[arg(long = "k", default_value_t = 2)]
    k: u32,
    /// Estimators to apply (repeatable).
    #[arg(long = "estimator", value_enum, required = true)]
    estimators: Vec<EstimatorArg>,
    /// Filters as comma-separated coefficients (repeatable).
    #[arg(long = "filter", required = true)]
    filters: Vec<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Named preset; `paper-table-1` ignores the other model flags.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long = "h", default_value_t = 0.7)]
    h: f64,
    #[arg(long = "t", default_value_t = 3.0)]
    t: f64,
    #[arg(long = "n", default_value_t = 1000)]
    n: usize,
    #[arg(long = "k", default_value_t = 2)]
    k: u32,
    /// Monte-Carlo replicates.
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = TABLE1_SEED)]
    seed: u64,
    /// Estimators (repeatable); cells are the cross product with --filter.
    #[arg(long = "estimator", value_enum)]
    estimators: Vec<EstimatorArg>,
    #[arg(long = "filter")]
    filters: Vec<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long = "h")]
    h: f64,
    #[arg(long = "t", default_value_t = 3.0)]
    t: f64,
    #[arg(long = "filter", required = true)]
    filters: Vec<String>,
    #[arg(long = "k", default_value_t = 2)]
    k: u32,
    /// Series truncation tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Also evaluate the exact finite-N quantities at this N.
    #[arg(long = "n")]
    n: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CltArgs {
    #[arg(long = "h")]
    h: f64,
    #[arg(long = "t", default_value_t = 3.0)]
    t: f64,
    #[arg(long = "n", default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long = "filter", default_value = "1,-1")]
    filter: String,
    #[arg(long = "k", default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct NoncentralArgs {
    #[arg(long = "h")]
    h: f64,
    #[arg(long = "t", default_value_t = 3.0)]
    t: f64,
    #[arg(long = "n", default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage/help text; keep exit code 1 for
            // malformed flags (help/version requests stay 0).
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_class(&e))
        }
    }
}

/// 1 for validation/parameter errors, 2 for numerical failures.
fn error_class(e: &CoreError) -> u8 {
    match e {
        CoreError::NotAFilter(_)
        | CoreError::AllMomentsVanish(_)
        | CoreError::InvalidParameter(_)
        | CoreError::FilterTooLong { .. }
        | CoreError::TooLarge { .. }
        | CoreError::OutOfRegime(_)
        | CoreError::DivergentSeries { .. }
        | CoreError::NoClosedFormSe(_) => 1,
        CoreError::NotPsd { .. }
        | CoreError::DegenerateFilter
        | CoreError::DegenerateVariance(_)
        | CoreError::NotMonotone { .. }
        | CoreError::DegenerateRatio(_)
        | CoreError::QuadratureNotConverged { .. } => 2,
    }
}

fn run(cli: Cli) -> Result<(), CoreError> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Estimate(args) => estimate(args),
        Command::Experiment(args) => experiment(args),
        Command::Constants(args) => constants(args),
        Command::CltCheck(args) => clt_check(args),
        Command::NoncentralCheck(args) => noncentral_check(args),
    }
}

fn write_output(out: &Option<String>, content: &str) -> Result<(), CoreError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CoreError::InvalidParameter(format!("cannot write {path}: {e}"))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CoreError::InvalidParameter(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(command: &str, payload: &T) -> String {
    let mut value = json!({
        "schema": SCHEMA_VERSION,
        "command": command,
    });
    value["result"] = serde_json::to_value(payload).expect("serializable payload");
    let mut s = serde_json::to_string_pretty(&value).expect("serializable payload");
    s.push('\n');
    s
}

fn simulate(args: SimulateArgs) -> Result<(), CoreError> {
    let model = WaveModel::new(args.h, args.t)?;
    let slice = sample_slice(&model, args.n, args.seed)?;
    let content = match args.output.format {
        Format::Csv => {
            let mut s = String::new();
            for (i, v) in slice.values().iter().enumerate() {
                s.push_str(&format!("{},{v:.17e}\n", slice.x(i)));
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct SliceOut<'a> {
                h: f64,
                t: f64,
                n: usize,
                seed: u64,
                values: &'a [f64],
            }
            to_json(
                "simulate",
                &SliceOut {
                    h: args.h,
                    t: args.t,
                    n: args.n,
                    seed: args.seed,
                    values: slice.values(),
                },
            )
        }
    };
    write_output(&args.output.out, &content)
}

fn read_slice_csv(path: &str) -> Result<Vec<f64>, CoreError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::InvalidParameter(format!("cannot read {path}: {e}")))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cell = line.split(',').nth(1).unwrap_or("");
        match cell.trim().parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if lineno == 0 => continue, // header row
            Err(e) => {
                return Err(CoreError::InvalidParameter(format!(
                    "{path}:{}: bad value {cell:?}: {e}",
                    lineno + 1
                )))
            }
        }
    }
    if values.len() < 3 {
        return Err(CoreError::InvalidParameter(format!(
            "{path}: need at least 3 grid values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

fn estimate(args: EstimateArgs) -> Result<(), CoreError> {
    let values: Vec<f64> = match &args.input {
        Some(path) => read_slice_csv(path)?,
        None => {
            let h = args.h.ok_or_else(|| {
                CoreError::InvalidParameter("either --input or --h is required".into())
            })?;
            let n = args.n.ok_or_else(|| {
                CoreError::InvalidParameter("--n is required when simulating".into())
            })?;
            let model = WaveModel::new(h, args.t)?;
            sample_slice(&model, n, args.seed)?.values().to_vec()
        }
    };
    let n = values.len() - 1;
    let mut results: Vec<EstimateResult> = Vec::new();
    for fs in &args.filters {
        let f = Filter::parse(fs)?;
        for est in &args.estimators {
            let s = empirical_abs_moment_values(&values, &f, args.k)?;
            let r = match est.method() {
                Method::Hat => estimate_hat_from_s(s, &f, args.k, n, args.t)?,
                Method::Bar => estimate_bar_from_s(s, &f, args.k, n, args.t)?,
                Method::Tilde => {
                    let s_thin = empirical_abs_moment_values(&values, &f.thin(), args.k)?;
                    estimate_tilde_from_s(s, s_thin, &f, args.k, n)?
                }
            };
            results.push(r);
        }
    }
    write_output(&args.output.out, &to_json("estimate", &results))
}

fn experiment_csv(reports: &[ExperimentReport]) -> String {
    let mut s = String::from(
        "record,h_true,method,filter,replicate,h_raw,h_est,clamped,mean,bias,sd,mse,failures\n",
    );
    for rep in reports {
        for cell in &rep.cells {
            for e in &cell.estimates {
                s.push_str(&format!(
                    "replicate,{},{},\"{}\",{},{:.17e},{:.17e},{},,,,,\n",
                    rep.config.h_true,
                    cell.method.name(),
                    cell.filter_id,
                    e.replicate,
                    e.h_raw,
                    e.h_est,
                    e.clamped
                ));
            }
            s.push_str(&format!(
                "summary,{},{},\"{}\",,,,,{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                rep.config.h_true,
                cell.method.name(),
                cell.filter_id,
                cell.mean,
                cell.bias,
                cell.sd,
                cell.mse,
                cell.failures
            ));
        }
    }
    s
}

fn experiment(args: ExperimentArgs) -> Result<(), CoreError> {
    if let Some(name) = &args.preset {
        if name != "paper-table-1" {
            return Err(CoreError::InvalidParameter(format!(
                "unknown preset {name:?} (available: paper-table-1)"
            )));
        }
        let report: Table1Report = table1_preset(args.seed)?;
        let content = match args.output.format {
            Format::Json => to_json("experiment", &report),
            Format::Csv => experiment_csv(&report.runs),
        };
        for run in &report.runs {
            eprintln!(
                "preset H={}: {} cells in {:.1} ms",
                run.config.h_true,
                run.cells.len(),
                run.wall_time_ms
            );
        }
        return write_output(&args.output.out, &content);
    }
    if args.estimators.is_empty() || args.filters.is_empty() {
        return Err(CoreError::InvalidParameter(
            "--estimator and --filter are required without --preset".into(),
        ));
    }
    let mut cells = Vec::new();
    for fs in &args.filters {
        let f = Filter::parse(fs)?;
        for est in &args.estimators {
            cells.push(CellSpec::new(est.method(), f.clone()));
        }
    }
    let config = ExperimentConfig {
        h_true: args.h,
        t: args.t,
        n: args.n,
        iterations: args.iters,
        seed: args.seed,
        k: args.k,
        cells,
    };
    let report = run_mc(&config)?;
    eprintln!("experiment finished in {:.1} ms", report.wall_time_ms);
    let content = match args.output.format {
        Format::Json => to_json("experiment", &report),
        Format::Csv => experiment_csv(std::slice::from_ref(&report)),
    };
    write_output(&args.output.out, &content)
}

fn constants(args: ConstantsArgs) -> Result<(), CoreError> {
    let filters: Vec<Filter> = args
        .filters
        .iter()
        .map(|s| Filter::parse(s))
        .collect::<Result<_, _>>()?;
    let lc = limit_constants(args.h, args.t, &filters, args.k, args.tol)?;
    #[derive(Serialize)]
    struct FiniteN {
        n: usize,
        exact_variance_by_chaos: Vec<(u32, f64)>,
        vn_noncentral_check: Option<f64>,
        cumulant_finite_n_m3: Option<f64>,
    }
    #[derive(Serialize)]
    struct ConstantsOut {
        h: f64,
        t: f64,
        k: u32,
        tol: f64,
        filters: Vec<String>,
        #[serde(flatten)]
        constants: fracwave::LimitConstants,
        finite_n: Option<FiniteN>,
        cumulant_limit_m3: Option<fracwave::limits::QuadratureResult>,
    }
    let finite_n = match args.n {
        Some(n) => {
            let model = WaveModel::new(args.h, args.t)?;
            let mut by_chaos = Vec::new();
            for q in 1..=(args.k / 2).max(1) {
                by_chaos.push((q, exact_variance_chaos(&model, &filters[0], n, args.k, q)?));
            }
            Some(FiniteN {
                n,
                exact_variance_by_chaos: by_chaos,
                vn_noncentral_check: vn_noncentral_check(&model, n).ok(),
                cumulant_finite_n_m3: if n <= 200 {
                    cumulant_finite_n(&model, n, 3).ok()
                } else {
                    None
                },
            })
        }
        None => None,
    };
    let out = ConstantsOut {
        h: args.h,
        t: args.t,
        k: args.k,
        tol: args.tol,
        filters: filters.iter().map(|f| f.id()).collect(),
        constants: lc,
        finite_n,
        cumulant_limit_m3: cumulant_limit(args.h, args.t, 3, 16, 1e-4).ok(),
    };
    write_output(&args.output.out, &to_json("constants", &out))
}

fn clt_check(args: CltArgs) -> Result<(), CoreError> {
    let f = Filter::parse(&args.filter)?;
    let d = clt_diagnostic(args.h, args.t, args.n, args.iters, &f, args.k, args.seed)?;
    let content = match args.output.format {
        Format::Json => to_json("clt-check", &d),
        Format::Csv => {
            let mut s = format!(
                "key,value\nsigma2_theory,{:.17e}\nsample_variance,{:.17e}\nvariance_ratio,{:.17e}\nks_statistic,{:.17e}\nks_p_value,{:.17e}\n",
                d.sigma2_theory, d.sample_variance, d.variance_ratio, d.ks.statistic, d.ks.p_value
            );
            s.push_str("bin_lo,bin_hi,count\n");
            for (i, c) in d.histogram.counts.iter().enumerate() {
                let lo = d.histogram.lo + i as f64 * d.histogram.width;
                s.push_str(&format!("{lo:.6e},{:.6e},{c}\n", lo + d.histogram.width));
            }
            s
        }
    };
    write_output(&args.output.out, &content)
}

fn noncentral_check(args: NoncentralArgs) -> Result<(), CoreError> {
    let d = noncentral_diagnostic(args.h, args.t, args.n, args.iters, args.seed)?;
    let content = match args.output.format {
        Format::Json => to_json("noncentral-check", &d),
        Format::Csv => {
            let mut s = format!(
                "key,value\nv_n_exact,{:.17e}\nsample_k2,{:.17e}\nsample_k3,{:.17e}\nsample_k4,{:.17e}\nk3_finite_n,{:.17e}\ngaussian_ks_p,{:.17e}\n",
                d.v_n_exact, d.sample_k2, d.sample_k3, d.sample_k4, d.k3_finite_n, d.gaussian_ks.p_value
            );
            s.push_str("bin_lo,bin_hi,count\n");
            for (i, c) in d.histogram.counts.iter().enumerate() {
                let lo = d.histogram.lo + i as f64 * d.histogram.width;
                s.push_str(&format!("{lo:.6e},{:.6e},{c}\n", lo + d.histogram.width));
            }
            s
        }
    };
    write_output(&args.output.out, &content)
}
