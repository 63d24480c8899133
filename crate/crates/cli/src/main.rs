//! Batch command-line surface over the selection, metrics, regression,
//! oracle and harness modules.
//!
//! Conventions: machine-readable payloads go to stdout (or `--output`),
//! diagnostics and timings go to stderr. Exit codes: 0 success, 1 runtime
//! error, 2 usage error. Every subcommand is deterministic under fixed
//! flags and seed.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use dafps::harness::{self, ExperimentPlan, MethodSpec};
use dafps::select::{InnerMethod, Method};
use dafps::{build_table, data, krr, metrics, oracle, predio, select, Error};

/// Environment variable overriding the default worker-thread count.
const THREADS_ENV: &str = "DAFPS_THREADS";

#[derive(Parser)]
#[command(
    name = "dafps",
    version,
    about = "Density-aware training-set selection, diagnostics and bound checking"
)]
struct Cli {
    /// Worker threads (default: all cores, or $DAFPS_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a training subset and write it as a Selection JSON document.
    Select(SelectArgs),
    /// Fit/evaluate a model on a selection, or score external predictions.
    Evaluate(EvaluateArgs),
    /// Sweep random instances and check the greedy bounds against
    /// exhaustive optima.
    Oracle(OracleArgs),
    /// Generate the synthetic 2-d mixture as CSV.
    Synth(SynthArgs),
    /// Greedy gain curves of the Gaussian-similarity facility location
    /// objective over a width grid.
    TuneGamma(TuneGammaArgs),
    /// Time table construction and selection on a synthetic pool.
    Bench(BenchArgs),
    /// Run a multi-method comparison plan.
    RunPlan(RunPlanArgs),
    /// Central-disc occupancy of the mixture illustration.
    Occupancy(OccupancyArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV (one point per row).
    #[arg(long)]
    input: PathBuf,
    /// The input's first row is a header.
    #[arg(long, default_value_t = false)]
    has_header: bool,
    /// Label column: an index or "last".
    #[arg(long)]
    label_column: Option<String>,
    /// Rescale features to [0, 1] after loading.
    #[arg(long, default_value_t = false)]
    normalize: bool,
}

impl InputArgs {
    fn load(&self) -> Result<data::PointSet, Error> {
        let label = match &self.label_column {
            None => None,
            Some(s) => Some(s.parse::<data::LabelColumn>()?),
        };
        let ps = data::load_points(&self.input, self.has_header, label)?;
        Ok(if self.normalize {
            data::normalize_unit_interval(&ps)
        } else {
            ps
        })
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// random | fps | dafps | kmedoidspp | facility_sqdist | facility_gauss
    /// | fps_prefixed
    #[arg(long)]
    method: String,
    /// Budget as a fraction of n in (0, 1); converts via floor.
    #[arg(long, conflicts_with = "budget_count")]
    budget: Option<f64>,
    /// Budget as an absolute count.
    #[arg(long)]
    budget_count: Option<usize>,
    /// Neighborhood size for dafps.
    #[arg(long)]
    k: Option<usize>,
    /// Uniform-weight phase: fraction (< 1) or count (>= 1).
    #[arg(long, default_value_t = 0.0)]
    u: f64,
    #[arg(long, default_value_t = dafps::DEFAULT_EPS_X)]
    eps_x: f64,
    /// Similarity width for facility_gauss (also the hybrid inner).
    #[arg(long)]
    gamma: Option<f64>,
    /// Inner method for fps_prefixed: random | kmedoidspp |
    /// facility_sqdist | facility_gauss.
    #[arg(long)]
    inner: Option<String>,
    /// First point for fps (default: seeded random).
    #[arg(long)]
    start: Option<usize>,
    /// Warm-start indices for dafps, comma-separated.
    #[arg(long)]
    initial: Option<String>,
    /// Refinement cap for kmedoidspp.
    #[arg(long, default_value_t = harness::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the Selection JSON (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Selection JSON produced by `select`.
    #[arg(long)]
    selection: PathBuf,
    /// Kernel for the built-in model: gaussian | cauchy.
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Kernel width (gamma for gaussian, gamma_c for cauchy).
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Score an external predictions file (two-column CSV: pool index,
    /// value) instead of fitting the built-in model.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Append the one-line CSV report (method,budget,seed,mae,rmse,maxae)
    /// to this file.
    #[arg(long)]
    csv_append: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Instances to draw.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Largest pool size per instance (sizes are drawn from [8, n]).
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Fixed budget (default: drawn from {2, 3}).
    #[arg(long)]
    b: Option<usize>,
    /// Fixed neighborhood size (default: drawn from {2, 3}).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the sweep CSV (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Preset: fig1 (the 650/200/150 mixture).
    #[arg(long, conflicts_with_all = ["central", "corner", "uniform"])]
    preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    central: usize,
    #[arg(long, default_value_t = 0)]
    corner: usize,
    #[arg(long, default_value_t = 0)]
    uniform: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the CSV (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TuneGammaArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated positive widths, e.g. 1000,10,5,1,0.1,0.01.
    #[arg(long)]
    grid: String,
    /// Budget as a fraction of n in (0, 1); converts via floor.
    #[arg(long, conflicts_with = "budget_count")]
    budget: Option<f64>,
    /// Budget as an absolute count.
    #[arg(long)]
    budget_count: Option<usize>,
    /// Shared first point for every width's run.
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// Output path for the gain-curve JSON (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Method to time (same names as `select`).
    #[arg(long, default_value = "dafps")]
    method: String,
    /// Synthetic pool size.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, conflicts_with = "budget_count", default_value_t = 0.2)]
    budget: f64,
    #[arg(long)]
    budget_count: Option<usize>,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    u: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    inner: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunPlanArgs {
    /// Plan JSON file.
    #[arg(long)]
    plan: PathBuf,
    /// Result CSV path (default: stdout).
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Also write the result table as JSON.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct OccupancyArgs {
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Output path for the summary JSON (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("dafps: failed to configure {t} worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dafps: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn emit(output: Option<&PathBuf>, payload: &str) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, payload)?,
        None => print!("{payload}"),
    }
    Ok(())
}

fn parse_method(s: &str) -> Result<Method, Error> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidParameter(format!("unknown method {s:?}")))
}

fn parse_inner(s: &str) -> Result<InnerMethod, Error> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::InvalidParameter(format!("unknown inner method {s:?}")))
}

fn resolve_budget(
    budget: Option<f64>,
    budget_count: Option<usize>,
    n: usize,
) -> Result<usize, Error> {
    let b = match (budget, budget_count) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter(
                "give either a budget fraction or a count, not both".into(),
            ))
        }
        (Some(f), None) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "budget fraction must lie in (0, 1], got {f}"
                )));
            }
            (f * n as f64).floor() as usize
        }
        (None, Some(c)) => c,
        (None, None) => {
            return Err(Error::InvalidParameter(
                "a budget (--budget or --budget-count) is required".into(),
            ))
        }
    };
    if b < 1 {
        return Err(Error::InvalidParameter(
            "budget resolves to zero points".into(),
        ));
    }
    Ok(b)
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Select(a) => cmd_select(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Synth(a) => cmd_synth(a),
        Command::TuneGamma(a) => cmd_tune_gamma(a),
        Command::Bench(a) => cmd_bench(a),
        Command::RunPlan(a) => cmd_run_plan(a),
        Command::Occupancy(a) => cmd_occupancy(a),
    }
}

fn cmd_select(a: SelectArgs) -> Result<(), Error> {
    let ps = a.input.load()?;
    let n = ps.len();
    let b = resolve_budget(a.budget, a.budget_count, n)?;
    let method = parse_method(&a.method)?;

    let selection = match method {
        Method::Random => select::select_random(&ps, b, a.seed)?,
        Method::Fps => select::select_fps(&ps, b, a.start, a.seed)?,
        Method::Dafps => {
            let k =
                a.k.ok_or_else(|| Error::InvalidParameter("dafps needs --k".into()))?;
            let table = build_table(&ps, k)?;
            let initial = match &a.initial {
                None => Vec::new(),
                Some(text) => text
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| {
                        t.trim().parse::<usize>().map_err(|_| {
                            Error::InvalidParameter(format!("bad initial index {t:?}"))
                        })
                    })
                    .collect::<Result<_, _>>()?,
            };
            let cfg = select::DafpsConfig {
                b,
                u: harness::resolve_count(a.u, n)?,
                initial,
                eps_x: a.eps_x,
                seed: a.seed,
                unit_weights: false,
            };
            select::select_dafps(&ps, Some(&table), &cfg)?
        }
        Method::Kmedoidspp => select::select_kmedoidspp(&ps, b, a.seed, a.max_iters)?,
        Method::FacilitySqdist => {
            select::select_facility_location(&ps, b, select::FacilityVariant::Sqdist, a.seed)?
        }
        Method::FacilityGauss => {
            let gamma = a
                .gamma
                .ok_or_else(|| Error::InvalidParameter("facility_gauss needs --gamma".into()))?;
            select::select_facility_location(
                &ps,
                b,
                select::FacilityVariant::Gauss { gamma },
                a.seed,
            )?
        }
        Method::FpsPrefixed => {
            let inner =
                parse_inner(a.inner.as_deref().ok_or_else(|| {
                    Error::InvalidParameter("fps_prefixed needs --inner".into())
                })?)?;
            let u = harness::resolve_count(a.u, n)?;
            select::fps_prefix_then(&ps, inner, b, u, a.gamma, a.seed, a.max_iters)?
        }
    };

    emit(a.output.as_ref(), &selection.to_json()?)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), Error> {
    let ps = a.input.load()?;
    if ps.labels().is_none() {
        return Err(Error::InvalidParameter(
            "evaluation needs labels (--label-column)".into(),
        ));
    }
    let selection = select::Selection::from_json(&std::fs::read_to_string(&a.selection)?)?;
    for &i in &selection.indices {
        if i >= ps.len() {
            return Err(Error::InvalidParameter(format!(
                "selection index {i} out of range for n={}",
                ps.len()
            )));
        }
    }
    let mut in_sel = vec![false; ps.len()];
    for &i in &selection.indices {
        in_sel[i] = true;
    }
    let complement: Vec<usize> = (0..ps.len()).filter(|&i| !in_sel[i]).collect();
    if complement.is_empty() {
        return Err(Error::Degenerate(
            "selection covers the whole pool; evaluation complement is empty".into(),
        ));
    }
    let labels = ps.labels().unwrap();
    let truth: Vec<f64> = complement.iter().map(|&i| labels[i]).collect();

    let preds = match &a.predictions {
        Some(path) => predio::load_predictions(path, &complement)?,
        None => {
            let width = a
                .width
                .ok_or_else(|| Error::InvalidParameter("built-in model needs --width".into()))?;
            let lambda = a
                .lambda
                .ok_or_else(|| Error::InvalidParameter("built-in model needs --lambda".into()))?;
            let kernel = match a.kernel.as_str() {
                "gaussian" => krr::Kernel::gaussian(width)?,
                "cauchy" => krr::Kernel::cauchy(width)?,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown kernel {other:?} (expected gaussian or cauchy)"
                    )))
                }
            };
            let model = krr::krr_fit(&ps, &selection.indices, kernel, lambda)?;
            krr::krr_predict(&model, &ps, &complement)?
        }
    };

    let report = metrics::eval_errors(&truth, &preds)?;
    if let Some(path) = &a.csv_append {
        use std::io::Write as _;
        let budget = selection.params.b as f64 / ps.len() as f64;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        writeln!(
            f,
            "{}",
            report.csv_row(&selection.method.to_string(), budget, selection.seed)
        )?;
    }
    print!("{}", report.to_json()?);
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Error> {
    let cfg = oracle::SweepConfig {
        trials: a.trials,
        n_min: 8.min(a.n),
        n_max: a.n,
        d: a.d,
        b_choices: a.b.map(|b| vec![b]).unwrap_or_else(|| vec![2, 3]),
        k_choices: a.k.map(|k| vec![k]).unwrap_or_else(|| vec![2, 3]),
        eps_x: dafps::DEFAULT_EPS_X,
        seed: a.seed,
    };
    cfg.check_guard()?;
    let t0 = Instant::now();
    let reports = oracle::run_sweep(&cfg)?;
    eprintln!(
        "dafps: oracle sweep of {} instances in {:.2}s",
        reports.len(),
        t0.elapsed().as_secs_f64()
    );
    let holds2 = reports.iter().filter(|r| r.holds_thm2).count();
    let holds3 = reports.iter().filter(|r| r.holds_thm3).count();
    eprintln!(
        "dafps: 2k bound held on {holds2}/{} instances, sigma*gamma bound on {holds3}/{}",
        reports.len(),
        reports.len()
    );
    emit(a.output.as_ref(), &oracle::sweep_to_csv(&reports))
}

fn cmd_synth(a: SynthArgs) -> Result<(), Error> {
    let spec = match a.preset.as_deref() {
        Some("fig1") => data::MixtureSpec::preset_1000(a.seed),
        Some(other) => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset {other:?} (expected fig1)"
            )))
        }
        None => data::MixtureSpec {
            central_count: a.central,
            corner_count: a.corner,
            uniform_count: a.uniform,
            seed: a.seed,
        },
    };
    let ps = data::synth_mixture(&spec)?;
    emit(a.output.as_ref(), &data::points_to_csv(&ps))
}

fn cmd_tune_gamma(a: TuneGammaArgs) -> Result<(), Error> {
    let ps = a.input.load()?;
    let b = resolve_budget(a.budget, a.budget_count, ps.len())?;
    let grid: Vec<f64> = a
        .grid
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad grid value {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    let curves = select::tune_gamma(&ps, b, &grid, a.start)?;
    let mut payload = serde_json::to_string_pretty(&curves)?;
    payload.push('\n');
    emit(a.output.as_ref(), &payload)
}

fn cmd_bench(a: BenchArgs) -> Result<(), Error> {
    let ps = data::synth_uniform(a.n, a.d, a.seed)?;
    let b = resolve_budget(
        Some(a.budget).filter(|_| a.budget_count.is_none()),
        a.budget_count,
        a.n,
    )?;
    let method = parse_method(&a.method)?;

    let t0 = Instant::now();
    let table = if method == Method::Dafps {
        Some(build_table(&ps, a.k)?)
    } else {
        None
    };
    let table_secs = t0.elapsed().as_secs_f64();

    let spec = MethodSpec {
        method,
        k: Some(a.k),
        u: Some(a.u),
        gamma: a.gamma,
        eps_x: None,
        inner: match &a.inner {
            None => None,
            Some(s) => Some(parse_inner(s)?),
        },
        max_iters: None,
    };
    let t1 = Instant::now();
    let selection = harness::run_selection(&ps, table.as_ref(), &spec, b, a.seed)?;
    let select_secs = t1.elapsed().as_secs_f64();

    let payload = serde_json::json!({
        "method": a.method,
        "n": a.n,
        "d": a.d,
        "b": b,
        "k": a.k,
        "table_secs": table_secs,
        "select_secs": select_secs,
        "secs_per_iteration": select_secs / b as f64,
        "total_secs": table_secs + select_secs,
        "selected": selection.indices.len(),
    });
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}

fn cmd_run_plan(a: RunPlanArgs) -> Result<(), Error> {
    let plan = ExperimentPlan::load(&a.plan)?;
    let t0 = Instant::now();
    let table = harness::run_plan(&plan)?;
    for r in &table.runs {
        eprintln!(
            "dafps: {} budget={} seed={}: select {:.3}s, evaluate {:.3}s ({})",
            r.method, r.budget, r.seed, r.select_secs, r.eval_secs, r.status
        );
    }
    eprintln!(
        "dafps: plan of {} runs in {:.2}s",
        table.runs.len(),
        t0.elapsed().as_secs_f64()
    );
    if let Some(path) = &a.out_json {
        std::fs::write(path, table.to_json()?)?;
    }
    let csv = table.to_csv(plan.metrics.as_deref());
    emit(a.out_csv.as_ref(), &csv)
}

fn cmd_occupancy(a: OccupancyArgs) -> Result<(), Error> {
    let summary = harness::mixture_occupancy(a.seeds)?;
    let mut payload = serde_json::to_string_pretty(&summary)?;
    payload.push('\n');
    emit(a.output.as_ref(), &payload)
}
