//! Multi-seed, multi-budget, multi-method comparison harness.
//!
//! A plan is a JSON document naming a labeled dataset, the selection
//! methods with their parameters, budget fractions, seeds, and a model
//! (kernel ridge regression, fit per run on the selected subset and
//! evaluated on the unselected complement, or externally produced
//! prediction files). Result tables are byte-reproducible for a fixed
//! plan: timings are kept out of the serialized rows and logged separately.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, LabelColumn, PointSet};
use crate::error::{Error, Result};
use crate::knn::{build_table, NeighborTable};
use crate::krr::{self, GridSpec, Kernel};
use crate::metrics;
use crate::select::{self, FacilityVariant, InnerMethod, Method};

/// Default refinement cap for the k-medoids baseline.
pub const DEFAULT_MAX_ITERS: usize = 100;

/// Method entry of a plan: a strategy plus its numeric parameters.
/// `u` is a fraction of n when < 1, otherwise an absolute count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inner: Option<InnerMethod>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_iters: Option<usize>,
}

impl MethodSpec {
    pub fn of(method: Method) -> Self {
        MethodSpec {
            method,
            k: None,
            u: None,
            gamma: None,
            eps_x: None,
            inner: None,
            max_iters: None,
        }
    }

    /// Display label: hybrids are tagged with their inner method.
    pub fn label(&self) -> String {
        match (self.method, self.inner) {
            (Method::FpsPrefixed, Some(inner)) => {
                format!("fps_prefixed:{}", serde_plain_inner(inner))
            }
            _ => self.method.to_string(),
        }
    }
}

fn serde_plain_inner(inner: InnerMethod) -> &'static str {
    match inner {
        InnerMethod::Random => "random",
        InnerMethod::Kmedoidspp => "kmedoidspp",
        InnerMethod::FacilitySqdist => "facility_sqdist",
        InnerMethod::FacilityGauss => "facility_gauss",
    }
}

/// Converts a `u` value (fraction when < 1, integral count when >= 1) to a
/// count against `n`.
pub fn resolve_count(u: f64, n: usize) -> Result<usize> {
    if !(u.is_finite()) || u < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "count/fraction must be nonnegative and finite, got {u}"
        )));
    }
    if u < 1.0 {
        Ok((u * n as f64).floor() as usize)
    } else if u.fract() == 0.0 {
        Ok(u as usize)
    } else {
        Err(Error::InvalidParameter(format!(
            "values >= 1 must be integral counts, got {u}"
        )))
    }
}

/// Converts a plan budget fraction in (0, 1] to a count via floor.
pub fn budget_count(fraction: f64, n: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "budget fractions must lie in (0, 1], got {fraction}"
        )));
    }
    Ok((fraction * n as f64).floor() as usize)
}

/// Model configuration of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum PlanModel {
    /// Kernel ridge regression. Either both `width` and `lambda` are given,
    /// or they are tuned once via the cross-validation grid protocol
    /// (random subsets at the plan budgets, 5 folds) and shared by every
    /// run.
    Krr {
        kernel: KernelFamily,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        width: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        lambda: Option<f64>,
        #[serde(default)]
        cv_seed: u64,
    },
    /// Externally produced predictions: a path template with `{method}`,
    /// `{budget}` and `{seed}` placeholders, each file a two-column CSV
    /// (pool index, predicted value) covering the run's complement.
    External { predictions: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Cauchy,
}

/// A full comparison plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: PathBuf,
    #[serde(default)]
    pub has_header: bool,
    /// Label column: an index or "last".
    pub label_column: String,
    /// Rescale features to [0, 1] before anything else.
    #[serde(default = "default_true")]
    pub normalize: bool,
    pub methods: Vec<MethodSpec>,
    /// Budget fractions in (0, 1].
    pub budgets: Vec<f64>,
    pub seeds: Vec<u64>,
    pub model: PlanModel,
    /// Metric subset to report; defaults to all three.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<Vec<String>>,
}

fn default_true() -> bool {
    true
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("plan has no methods".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("plan has no seeds".into()));
        }
        if self.budgets.is_empty() {
            return Err(Error::InvalidParameter("plan has no budgets".into()));
        }
        for &f in &self.budgets {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "budget fractions must lie in (0, 1], got {f}"
                )));
            }
        }
        if let Some(ms) = &self.metrics {
            for m in ms {
                if !matches!(m.as_str(), "mae" | "rmse" | "maxae") {
                    return Err(Error::InvalidParameter(format!(
                        "unknown metric {m:?} (expected mae, rmse, maxae)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One run of the plan. Timings are recorded but excluded from the
/// serialized table so result files are byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub method: String,
    pub budget: f64,
    pub seed: u64,
    pub b: usize,
    pub n_eval: usize,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub maxae: Option<f64>,
    /// "ok", "degenerate: ...", or "error: ...".
    pub status: String,
    #[serde(skip)]
    pub select_secs: f64,
    #[serde(skip)]
    pub eval_secs: f64,
}

/// Mean/standard-deviation aggregate over the seeds of one
/// (method, budget) cell. Population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggRow {
    pub method: String,
    pub budget: f64,
    pub n_seeds: usize,
    pub mae_mean: Option<f64>,
    pub mae_std: Option<f64>,
    pub rmse_mean: Option<f64>,
    pub rmse_std: Option<f64>,
    pub maxae_mean: Option<f64>,
    pub maxae_std: Option<f64>,
}

/// Full result table: per-run rows in plan order (method-major, then
/// budget, then seed) followed by per-(method, budget) aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub runs: Vec<RunRow>,
    pub aggregates: Vec<AggRow>,
}

impl ResultTable {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Single CSV with aggregate rows flagged in the first column.
    pub fn to_csv(&self, metric_filter: Option<&[String]>) -> String {
        let want = |m: &str| metric_filter.map_or(true, |f| f.iter().any(|x| x == m));
        let fmt = |v: Option<f64>, on: bool| {
            if !on {
                return String::new();
            }
            v.map(|x| x.to_string()).unwrap_or_default()
        };
        let mut out = String::from(
            "row_type,method,budget,seed,b,n_eval,mae,rmse,maxae,mae_std,rmse_std,maxae_std,status\n",
        );
        for r in &self.runs {
            let _ = writeln!(
                out,
                "run,{},{},{},{},{},{},{},{},,,,{}",
                r.method,
                r.budget,
                r.seed,
                r.b,
                r.n_eval,
                fmt(r.mae, want("mae")),
                fmt(r.rmse, want("rmse")),
                fmt(r.maxae, want("maxae")),
                r.status
            );
        }
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "aggregate,{},{},,{},,{},{},{},{},{},{},",
                a.method,
                a.budget,
                a.n_seeds,
                fmt(a.mae_mean, want("mae")),
                fmt(a.rmse_mean, want("rmse")),
                fmt(a.maxae_mean, want("maxae")),
                fmt(a.mae_std, want("mae")),
                fmt(a.rmse_std, want("rmse")),
                fmt(a.maxae_std, want("maxae")),
            );
        }
        out
    }
}

/// Dispatches one selection per the method spec.
pub fn run_selection(
    ps: &PointSet,
    table: Option<&NeighborTable>,
    spec: &MethodSpec,
    b: usize,
    seed: u64,
) -> Result<select::Selection> {
    let n = ps.len();
    match spec.method {
        Method::Random => select::select_random(ps, b, seed),
        Method::Fps => select::select_fps(ps, b, None, seed),
        Method::Dafps => {
            let u = resolve_count(spec.u.unwrap_or(0.0), n)?;
            let cfg = select::DafpsConfig {
                b,
                u,
                initial: Vec::new(),
                eps_x: spec.eps_x.unwrap_or(crate::density::DEFAULT_EPS_X),
                seed,
                unit_weights: false,
            };
            select::select_dafps(ps, table, &cfg)
        }
        Method::Kmedoidspp => {
            select::select_kmedoidspp(ps, b, seed, spec.max_iters.unwrap_or(DEFAULT_MAX_ITERS))
        }
        Method::FacilitySqdist => {
            select::select_facility_location(ps, b, FacilityVariant::Sqdist, seed)
        }
        Method::FacilityGauss => {
            let gamma = spec
                .gamma
                .ok_or_else(|| Error::InvalidParameter("facility_gauss needs gamma".into()))?;
            select::select_facility_location(ps, b, FacilityVariant::Gauss { gamma }, seed)
        }
        Method::FpsPrefixed => {
            let inner = spec.inner.ok_or_else(|| {
                Error::InvalidParameter("fps_prefixed needs an inner method".into())
            })?;
            let u = resolve_count(spec.u.unwrap_or(0.0), n)?;
            select::fps_prefix_then(
                ps,
                inner,
                b,
                u,
                spec.gamma,
                seed,
                spec.max_iters.unwrap_or(DEFAULT_MAX_ITERS),
            )
        }
    }
}

/// Executes the plan: for every (method, budget, seed) select, fit on the
/// selection, and evaluate on the unselected complement. Failures are
/// recorded in the row status instead of aborting the table.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.validate()?;
    let label_column: LabelColumn = plan.label_column.parse()?;
    let raw = data::load_points(&plan.dataset, plan.has_header, Some(label_column))?;
    let ps = if plan.normalize {
        data::normalize_unit_interval(&raw)
    } else {
        raw
    };
    let n = ps.len();

    // one shared neighbor table per k used by any density-aware method
    let mut k_values: Vec<usize> = plan
        .methods
        .iter()
        .filter(|m| m.method == Method::Dafps)
        .map(|m| {
            m.k.ok_or_else(|| Error::InvalidParameter("dafps needs k".into()))
        })
        .collect::<Result<_>>()?;
    k_values.sort_unstable();
    k_values.dedup();
    let tables: Vec<(usize, NeighborTable)> = k_values
        .into_iter()
        .map(|k| Ok((k, build_table(&ps, k)?)))
        .collect::<Result<_>>()?;

    // resolve the model once; CV-tuned hyperparameters are shared by all
    // methods and budgets
    enum ResolvedModel {
        Krr(Kernel, f64),
        External(String),
    }
    let model = match &plan.model {
        PlanModel::External { predictions } => ResolvedModel::External(predictions.clone()),
        PlanModel::Krr {
            kernel,
            width,
            lambda,
            cv_seed,
        } => {
            let (kind, grid) = match kernel {
                KernelFamily::Gaussian => (
                    Kernel::Gaussian { gamma: 1.0 },
                    GridSpec::gaussian_default(),
                ),
                KernelFamily::Cauchy => {
                    (Kernel::Cauchy { gamma_c: 1.0 }, GridSpec::cauchy_default())
                }
            };
            let (w, l) = match (width, lambda) {
                (Some(w), Some(l)) => (*w, *l),
                _ => {
                    let budgets: Vec<usize> = plan
                        .budgets
                        .iter()
                        .map(|&f| budget_count(f, n))
                        .collect::<Result<_>>()?;
                    let cv = krr::cv_grid_search(&ps, &budgets, kind, &grid, 5, *cv_seed)?;
                    (cv.width, cv.lambda)
                }
            };
            let kind = match kernel {
                KernelFamily::Gaussian => Kernel::gaussian(w)?,
                KernelFamily::Cauchy => Kernel::cauchy(w)?,
            };
            ResolvedModel::Krr(kind, l)
        }
    };

    // the run list in deterministic plan order
    let mut jobs = Vec::new();
    for spec in &plan.methods {
        for &budget in &plan.budgets {
            for &seed in &plan.seeds {
                jobs.push((spec.clone(), budget, seed));
            }
        }
    }

    let runs: Vec<RunRow> = jobs
        .par_iter()
        .map(|(spec, budget, seed)| run_one(&ps, &tables, spec, *budget, *seed, &model))
        .collect();

    let mut aggregates = Vec::new();
    for spec in &plan.methods {
        for &budget in &plan.budgets {
            let cell: Vec<&RunRow> = runs
                .iter()
                .filter(|r| r.method == spec.label() && r.budget == budget && r.status == "ok")
                .collect();
            let stat = |f: fn(&RunRow) -> Option<f64>| -> (Option<f64>, Option<f64>) {
                let vals: Vec<f64> = cell.iter().filter_map(|r| f(r)).collect();
                if vals.is_empty() {
                    return (None, None);
                }
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
                (Some(mean), Some(var.sqrt()))
            };
            let (mae_mean, mae_std) = stat(|r| r.mae);
            let (rmse_mean, rmse_std) = stat(|r| r.rmse);
            let (maxae_mean, maxae_std) = stat(|r| r.maxae);
            aggregates.push(AggRow {
                method: spec.label(),
                budget,
                n_seeds: cell.len(),
                mae_mean,
                mae_std,
                rmse_mean,
                rmse_std,
                maxae_mean,
                maxae_std,
            });
        }
    }

    return Ok(ResultTable { runs, aggregates });

    fn run_one(
        ps: &PointSet,
        tables: &[(usize, NeighborTable)],
        spec: &MethodSpec,
        budget: f64,
        seed: u64,
        model: &ResolvedModel,
    ) -> RunRow {
        let n = ps.len();
        let mut row = RunRow {
            method: spec.label(),
            budget,
            seed,
            b: 0,
            n_eval: 0,
            mae: None,
            rmse: None,
            maxae: None,
            status: "ok".into(),
            select_secs: 0.0,
            eval_secs: 0.0,
        };
        let b = match budget_count(budget, n) {
            Ok(0) => {
                row.status = "error: budget resolves to zero points".into();
                return row;
            }
            Ok(b) => b,
            Err(e) => {
                row.status = format!("error: {e}");
                return row;
            }
        };
        row.b = b;

        let table = spec
            .k
            .and_then(|k| tables.iter().find(|(tk, _)| *tk == k).map(|(_, t)| t));
        let t0 = Instant::now();
        let selection = match run_selection(ps, table, spec, b, seed) {
            Ok(s) => s,
            Err(e) => {
                row.status = format!("error: {e}");
                return row;
            }
        };
        row.select_secs = t0.elapsed().as_secs_f64();

        let mut in_sel = vec![false; n];
        for &i in &selection.indices {
            in_sel[i] = true;
        }
        let complement: Vec<usize> = (0..n).filter(|&i| !in_sel[i]).collect();
        row.n_eval = complement.len();
        if complement.is_empty() {
            row.status = "degenerate: evaluation complement is empty".into();
            return row;
        }

        let t1 = Instant::now();
        let labels = ps.labels().expect("plan loader enforces labels");
        let truth: Vec<f64> = complement.iter().map(|&i| labels[i]).collect();
        let preds = match model {
            ResolvedModel::Krr(kind, lambda) => {
                match krr::krr_fit(ps, &selection.indices, *kind, *lambda)
                    .and_then(|m| krr::krr_predict(&m, ps, &complement))
                {
                    Ok(p) => p,
                    Err(e) => {
                        row.status = format!("error: {e}");
                        return row;
                    }
                }
            }
            ResolvedModel::External(template) => {
                let path = template
                    .replace("{method}", &spec.label())
                    .replace("{budget}", &format!("{budget}"))
                    .replace("{seed}", &format!("{seed}"));
                match crate::predio::load_predictions(&path, &complement) {
                    Ok(p) => p,
                    Err(e) => {
                        row.status = format!("error: {e}");
                        return row;
                    }
                }
            }
        };
        match metrics::eval_errors(&truth, &preds) {
            Ok(rep) => {
                row.mae = Some(rep.mae);
                row.rmse = Some(rep.rmse);
                row.maxae = Some(rep.maxae);
            }
            Err(e) => {
                row.status = format!("error: {e}");
            }
        }
        row.eval_secs = t1.elapsed().as_secs_f64();
        row
    }
}

/// Central-disc occupancy summary of the synthetic-mixture illustration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancySummary {
    pub seeds: usize,
    pub disc_center: [f64; 2],
    pub disc_radius: f64,
    pub budget: usize,
    /// (method label, per-seed counts, mean count), in method order
    /// random, fps, dafps.
    pub rows: Vec<OccupancyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyRow {
    pub method: String,
    pub per_seed: Vec<usize>,
    pub mean: f64,
}

/// Disc radius used to count "central cluster" selections; a measurement
/// convention of this summary.
pub const CENTRAL_DISC_RADIUS: f64 = 0.2;

/// Generates the 650/200/150 mixture per seed, selects 100 points with
/// random, FPS and the density-aware selector (u = 0, k = 100), and counts
/// selections inside the central disc.
pub fn mixture_occupancy(seed_count: usize) -> Result<OccupancySummary> {
    if seed_count == 0 {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let budget = 100;
    let k = 100;
    let center = data::CENTRAL_MEAN;
    let mut per_method: Vec<(String, Vec<usize>)> = vec![
        ("random".into(), Vec::new()),
        ("fps".into(), Vec::new()),
        ("dafps".into(), Vec::new()),
    ];

    for seed in 0..seed_count as u64 {
        let ps = data::synth_mixture(&data::MixtureSpec::preset_1000(seed))?;
        let table = build_table(&ps, k)?;
        let in_disc = |indices: &[usize]| -> usize {
            indices
                .iter()
                .filter(|&&i| {
                    let p = ps.point(i);
                    let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                    (dx * dx + dy * dy).sqrt() <= CENTRAL_DISC_RADIUS
                })
                .count()
        };
        let rdm = select::select_random(&ps, budget, seed)?;
        let fps = select::select_fps(&ps, budget, None, seed)?;
        let cfg = select::DafpsConfig::new(budget, 0, seed);
        let da = select::select_dafps(&ps, Some(&table), &cfg)?;
        per_method[0].1.push(in_disc(&rdm.indices));
        per_method[1].1.push(in_disc(&fps.indices));
        per_method[2].1.push(in_disc(&da.indices));
    }

    let rows = per_method
        .into_iter()
        .map(|(method, per_seed)| {
            let mean = per_seed.iter().sum::<usize>() as f64 / per_seed.len() as f64;
            OccupancyRow {
                method,
                per_seed,
                mean,
            }
        })
        .collect();
    Ok(OccupancySummary {
        seeds: seed_count,
        disc_center: center,
        disc_radius: CENTRAL_DISC_RADIUS,
        budget,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_dataset(dir: &std::path::Path) -> PathBuf {
        let mut text = String::new();
        for i in 0..40 {
            let x = i as f64 / 39.0;
            let y = (4.0 * x).sin();
            text.push_str(&format!("{x},{y}\n"));
        }
        let path = dir.join("toy.csv");
        std::fs::write(&path, text).unwrap();
        path
    }

    fn toy_plan(dataset: PathBuf) -> ExperimentPlan {
        ExperimentPlan {
            dataset,
            has_header: false,
            label_column: "last".into(),
            normalize: true,
            methods: vec![MethodSpec::of(Method::Random), MethodSpec::of(Method::Fps)],
            budgets: vec![0.25, 0.5],
            seeds: vec![1, 2, 3, 4, 5],
            model: PlanModel::Krr {
                kernel: KernelFamily::Gaussian,
                width: Some(1e-1),
                lambda: Some(1e-4),
                cv_seed: 0,
            },
            metrics: None,
        }
    }

    #[test]
    fn plan_cartesian_row_counts() {
        let dir = std::env::temp_dir().join("dafps-harness-test-a");
        std::fs::create_dir_all(&dir).unwrap();
        let plan = toy_plan(write_dataset(&dir));
        let table = run_plan(&plan).unwrap();
        assert_eq!(table.runs.len(), 2 * 2 * 5);
        assert_eq!(table.aggregates.len(), 2 * 2);
        for r in &table.runs {
            assert_eq!(r.status, "ok", "{r:?}");
        }
    }

    #[test]
    fn full_budget_row_is_degenerate_not_fatal() {
        let dir = std::env::temp_dir().join("dafps-harness-test-b");
        std::fs::create_dir_all(&dir).unwrap();
        let mut plan = toy_plan(write_dataset(&dir));
        plan.budgets = vec![1.0];
        plan.methods = vec![MethodSpec::of(Method::Random)];
        let table = run_plan(&plan).unwrap();
        assert_eq!(table.runs.len(), 5);
        for r in &table.runs {
            assert!(r.status.starts_with("degenerate:"), "{r:?}");
            assert!(r.mae.is_none());
        }
        // the aggregate has no contributing seeds
        assert_eq!(table.aggregates[0].n_seeds, 0);
    }

    #[test]
    fn aggregate_mean_matches_recomputation() {
        let dir = std::env::temp_dir().join("dafps-harness-test-c");
        std::fs::create_dir_all(&dir).unwrap();
        let plan = toy_plan(write_dataset(&dir));
        let table = run_plan(&plan).unwrap();
        for agg in &table.aggregates {
            let maes: Vec<f64> = table
                .runs
                .iter()
                .filter(|r| r.method == agg.method && r.budget == agg.budget)
                .filter_map(|r| r.mae)
                .collect();
            let mean = maes.iter().sum::<f64>() / maes.len() as f64;
            assert!((agg.mae_mean.unwrap() - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn tables_are_reproducible() {
        let dir = std::env::temp_dir().join("dafps-harness-test-d");
        std::fs::create_dir_all(&dir).unwrap();
        let plan = toy_plan(write_dataset(&dir));
        let a = run_plan(&plan).unwrap();
        let b = run_plan(&plan).unwrap();
        assert_eq!(a.to_csv(None), b.to_csv(None));
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn plan_json_round_trip_and_validation() {
        let dir = std::env::temp_dir().join("dafps-harness-test-e");
        std::fs::create_dir_all(&dir).unwrap();
        let plan = toy_plan(write_dataset(&dir));
        let text = serde_json::to_string(&plan).unwrap();
        let back = ExperimentPlan::from_json(&text).unwrap();
        assert_eq!(back, plan);

        let mut bad = plan.clone();
        bad.budgets = vec![1.5];
        assert!(bad.validate().is_err());
        let mut bad = plan.clone();
        bad.seeds.clear();
        assert!(bad.validate().is_err());
        let mut bad = plan;
        bad.metrics = Some(vec!["mse".into()]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn resolve_count_rules() {
        assert_eq!(resolve_count(0.2, 1000).unwrap(), 200);
        assert_eq!(resolve_count(0.03, 996).unwrap(), 29);
        assert_eq!(resolve_count(5.0, 1000).unwrap(), 5);
        assert_eq!(resolve_count(0.0, 10).unwrap(), 0);
        assert!(resolve_count(5.5, 1000).is_err());
        assert!(resolve_count(-0.1, 1000).is_err());
    }

    #[test]
    fn occupancy_counts_capped_by_budget() {
        let s = mixture_occupancy(2).unwrap();
        assert_eq!(s.rows.len(), 3);
        for row in &s.rows {
            assert_eq!(row.per_seed.len(), 2);
            for &c in &row.per_seed {
                assert!(c <= 100);
            }
        }
    }

    #[test]
    fn random_occupancy_matches_binomial_model() {
        // uniform sampling of 100 of 1000 points lands in the central disc
        // binomially with p = the pool's in-disc fraction; the observed
        // mean must sit within 3 sigma of that expectation
        let seeds = 5usize;
        let s = mixture_occupancy(seeds).unwrap();
        let rdm = s.rows.iter().find(|r| r.method == "random").unwrap();
        let mut expect_sum = 0.0;
        let mut var_sum = 0.0;
        for seed in 0..seeds as u64 {
            let ps =
                crate::data::synth_mixture(&crate::data::MixtureSpec::preset_1000(seed)).unwrap();
            let p = (0..ps.len())
                .filter(|&i| {
                    let pt = ps.point(i);
                    let (dx, dy) = (pt[0] - 0.5, pt[1] - 0.5);
                    (dx * dx + dy * dy).sqrt() <= CENTRAL_DISC_RADIUS
                })
                .count() as f64
                / ps.len() as f64;
            expect_sum += 100.0 * p;
            var_sum += 100.0 * p * (1.0 - p);
        }
        let expect_mean = expect_sum / seeds as f64;
        let sigma_mean = var_sum.sqrt() / seeds as f64;
        assert!(
            (rdm.mean - expect_mean).abs() <= 3.0 * sigma_mean,
            "random occupancy {} vs binomial expectation {expect_mean} (3 sigma = {})",
            rdm.mean,
            3.0 * sigma_mean
        );
    }
}
