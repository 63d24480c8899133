//! Brute-force reference implementations and empirical bound checkers for
//! the greedy selectors.
//!
//! The exhaustive optimum enumerates every size-b subset (guarded against
//! combinatorial blowup) and evaluates the estimated weighted fill distance
//! for each, pruning a candidate as soon as its running maximum reaches the
//! incumbent. The checkers compare the greedy value against the exhaustive
//! optimum under two bounds: w_greedy <= 2k * w_opt, and the alternative
//! w_greedy <= sigma * gamma * w_opt with sigma = min(3, 1 + alpha) and
//! gamma, alpha ratios of greedy-trace weights to optimal-set weights.

use std::fmt::Write as _;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::data::PointSet;
use crate::density::WeightState;
use crate::error::{Error, Result};
use crate::knn::{build_table, NeighborTable};
use crate::select::{select_dafps, DafpsConfig};

/// Subset-count guard for exhaustive enumeration.
pub const MAX_SUBSETS: f64 = 1e6;

/// Relative slack on bound comparisons, absorbing float roundoff in
/// exactly-tight cases.
const BOUND_EPS: f64 = 1e-9;

/// Outcome of the bound checks on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub b: usize,
    pub k: usize,
    pub d: usize,
    pub seed: u64,
    /// Estimated weighted fill distance of the greedy set.
    pub w_greedy: f64,
    /// Exhaustive optimum of the same objective.
    pub w_opt: f64,
    /// w_greedy / w_opt, with 0/0 mapped to 1.
    pub ratio: f64,
    pub bound_2k: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub holds_thm2: bool,
    pub holds_thm3: bool,
}

impl BoundReport {
    pub const CSV_HEADER: &'static str =
        "instance,seed,n,d,b,k,w_greedy,w_opt,ratio,bound_2k,gamma,alpha,sigma,holds_thm2,holds_thm3";

    pub fn csv_row(&self, instance: usize) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{instance},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.n,
            self.d,
            self.b,
            self.k,
            self.w_greedy,
            self.w_opt,
            self.ratio,
            self.bound_2k,
            self.gamma,
            self.alpha,
            self.sigma,
            self.holds_thm2,
            self.holds_thm3
        );
        s
    }
}

fn binomial(n: usize, b: usize) -> f64 {
    let b = b.min(n - b);
    let mut acc = 1.0f64;
    for i in 0..b {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
        if acc > 1e18 {
            return acc;
        }
    }
    acc
}

fn check_guard(n: usize, b: usize) -> Result<()> {
    if b > n {
        return Err(Error::InvalidParameter(format!(
            "budget {b} exceeds pool size {n}"
        )));
    }
    let count = binomial(n, b);
    if count > MAX_SUBSETS {
        return Err(Error::Refused(format!(
            "C({n},{b}) = {count:.3e} subsets exceeds the enumeration guard of {MAX_SUBSETS:.0e}"
        )));
    }
    Ok(())
}

/// Exhaustively minimizes the estimated weighted fill distance over all
/// size-b subsets. Returns the lexicographically lowest minimizer and its
/// value. Refuses when C(n, b) exceeds [`MAX_SUBSETS`].
pub fn brute_optimal_wfd(
    ps: &PointSet,
    table: &NeighborTable,
    b: usize,
    eps_x: f64,
) -> Result<(Vec<usize>, f64)> {
    check_guard(ps.len(), b)?;
    brute_minimize(ps, b, |subset, incumbent| {
        wfd_with_cutoff(ps, table, subset, eps_x, incumbent)
    })
}

/// Exhaustively minimizes the plain fill distance (the unit-weight
/// objective) over all size-b subsets.
pub fn brute_optimal_fill(ps: &PointSet, b: usize) -> Result<(Vec<usize>, f64)> {
    check_guard(ps.len(), b)?;
    brute_minimize(ps, b, |subset, incumbent| {
        let mut worst = 0.0f64;
        for i in 0..ps.len() {
            let md = subset
                .iter()
                .map(|&s| ps.sq_dist(i, s))
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            if md > worst {
                worst = md;
                if worst >= incumbent {
                    return None;
                }
            }
        }
        Some(worst)
    })
}

/// Lexicographic subset enumeration with an incumbent-pruned evaluator.
/// The evaluator returns `None` when the subset provably cannot beat the
/// incumbent (strict improvement semantics keep the first minimizer).
fn brute_minimize<F>(ps: &PointSet, b: usize, eval: F) -> Result<(Vec<usize>, f64)>
where
    F: Fn(&[usize], f64) -> Option<f64>,
{
    let n = ps.len();
    let mut subset: Vec<usize> = (0..b).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let incumbent = best.as_ref().map_or(f64::INFINITY, |(_, v)| *v);
        if let Some(value) = eval(&subset, incumbent) {
            best = Some((subset.clone(), value));
        }
        // advance to the next lexicographic combination
        let mut i = b;
        loop {
            if i == 0 {
                return Ok(best.expect("at least one subset evaluated"));
            }
            i -= 1;
            if subset[i] != i + n - b {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..b {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Estimated weighted fill distance of `subset`, aborting with `None` once
/// the running maximum reaches `cutoff`.
fn wfd_with_cutoff(
    ps: &PointSet,
    table: &NeighborTable,
    subset: &[usize],
    eps_x: f64,
    cutoff: f64,
) -> Option<f64> {
    let eps_term = eps_x / subset.len() as f64;
    let mut worst = 0.0f64;
    for i in 0..ps.len() {
        let md = subset
            .iter()
            .map(|&s| ps.sq_dist(i, s))
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        let r = (md + eps_term).min(table.rho_k(i));
        let score = table.count_within(i, r) as f64 * md;
        if score > worst {
            worst = score;
            if worst >= cutoff {
                return None;
            }
        }
    }
    Some(worst)
}

/// Runs the greedy selector to b+1 picks and evaluates both approximation
/// bounds against the exhaustive optimum. `seed` drives the greedy's first
/// pick. Requires `b + 1 <= n` so the trace point x_{b+1} exists.
fn verify_bounds(
    ps: &PointSet,
    table: &NeighborTable,
    b: usize,
    eps_x: f64,
    seed: u64,
) -> Result<BoundReport> {
    let n = ps.len();
    let k = table.k();
    check_guard(n, b)?;
    if b + 1 > n {
        return Err(Error::InvalidParameter(format!(
            "bound verification extends the greedy run to b+1 = {} picks but n = {n}",
            b + 1
        )));
    }

    // Greedy run to b+1 selections (empty initial set, u = 0).
    let cfg = DafpsConfig {
        b: b + 1,
        u: 0,
        initial: Vec::new(),
        eps_x,
        seed,
        unit_weights: false,
    };
    let extended = select_dafps(ps, Some(table), &cfg)?;

    // omega of x_j under the prefix L_{j-1} (prefix of length j-1), with
    // the empty-prefix convention omega = k. Recomputed from scratch
    // rather than read from the selector.
    let picks = &extended.indices;
    let mut trace_omega = Vec::with_capacity(b + 1);
    {
        let mut st = WeightState::new(n, k, eps_x)?;
        for &x in picks.iter() {
            trace_omega.push(crate::density::omega(x, &st, table));
            st.push(x, ps, table);
        }
    }

    let w_greedy = crate::metrics::estimated_wfd(ps, table, &picks[..b], eps_x)?;
    let (opt_set, w_opt) = brute_optimal_wfd(ps, table, b, eps_x)?;

    // omega of each greedy pick under the optimal set
    let omega_opt: Vec<usize> = {
        let mut st = WeightState::new(n, k, eps_x)?;
        for &o in &opt_set {
            st.push(o, ps, table);
        }
        picks
            .iter()
            .map(|&x| crate::density::omega(x, &st, table))
            .collect()
    };

    let gamma = picks
        .iter()
        .enumerate()
        .map(|(j, _)| trace_omega[j] as f64 / omega_opt[j] as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut alpha = f64::NEG_INFINITY;
    for j in 1..=b {
        for i in 0..j {
            alpha = alpha.max(trace_omega[j] as f64 / trace_omega[i] as f64);
        }
    }
    let sigma = 3.0f64.min(1.0 + alpha);

    let ratio = if w_opt == 0.0 {
        if w_greedy == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        w_greedy / w_opt
    };
    let bound_2k = 2.0 * k as f64;
    let holds_thm2 = w_greedy <= bound_2k * w_opt + BOUND_EPS * w_greedy.max(1.0);
    let holds_thm3 = w_greedy <= sigma * gamma * w_opt + BOUND_EPS * w_greedy.max(1.0);

    Ok(BoundReport {
        n,
        b,
        k,
        d: ps.dim(),
        seed,
        w_greedy,
        w_opt,
        ratio,
        bound_2k,
        gamma,
        alpha,
        sigma,
        holds_thm2,
        holds_thm3,
    })
}

/// Checks the 2k-approximation bound of the greedy selector on one
/// instance (the report also carries the alternative-bound quantities).
pub fn check_2k_bound(
    ps: &PointSet,
    table: &NeighborTable,
    b: usize,
    eps_x: f64,
    seed: u64,
) -> Result<BoundReport> {
    verify_bounds(ps, table, b, eps_x, seed)
}

/// Checks the sigma*gamma bound (fixed-weight k-center analysis extended to
/// dynamic weights) on one instance.
pub fn check_sigma_gamma_bound(
    ps: &PointSet,
    table: &NeighborTable,
    b: usize,
    eps_x: f64,
    seed: u64,
) -> Result<BoundReport> {
    verify_bounds(ps, table, b, eps_x, seed)
}

/// Configuration of a randomized bound-checking sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub trials: usize,
    /// Pool sizes are drawn uniformly from `[n_min, n_max]`.
    pub n_min: usize,
    pub n_max: usize,
    pub d: usize,
    /// Budgets drawn uniformly from this set.
    pub b_choices: Vec<usize>,
    /// Neighborhood sizes drawn uniformly from this set.
    pub k_choices: Vec<usize>,
    pub eps_x: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            trials: 200,
            n_min: 8,
            n_max: 12,
            d: 2,
            b_choices: vec![2, 3],
            k_choices: vec![2, 3],
            eps_x: crate::density::DEFAULT_EPS_X,
            seed: 0,
        }
    }
}

impl SweepConfig {
    /// Validates the guard for the largest instance the sweep can draw.
    pub fn check_guard(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("sweep needs trials >= 1".into()));
        }
        if self.n_min < 2 || self.n_min > self.n_max {
            return Err(Error::InvalidParameter(format!(
                "pool size range [{}, {}] is invalid",
                self.n_min, self.n_max
            )));
        }
        for &b in &self.b_choices {
            check_guard(self.n_max, b)?;
            if b + 1 > self.n_min {
                return Err(Error::InvalidParameter(format!(
                    "budget {b} needs pools of at least b+1 = {} points",
                    b + 1
                )));
            }
        }
        for &k in &self.k_choices {
            if k < 2 || k >= self.n_min {
                return Err(Error::InvalidParameter(format!(
                    "neighborhood size {k} must satisfy 2 <= k < n_min = {}",
                    self.n_min
                )));
            }
        }
        Ok(())
    }
}

/// Runs `trials` seeded random instances and returns one report per
/// instance, in order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<BoundReport>> {
    cfg.check_guard()?;
    let mut master = StdRng::seed_from_u64(cfg.seed);
    let mut reports = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        let n = master.gen_range(cfg.n_min..=cfg.n_max);
        let b = cfg.b_choices[master.gen_range(0..cfg.b_choices.len())];
        let k = cfg.k_choices[master.gen_range(0..cfg.k_choices.len())];
        let instance_seed: u64 = master.gen();
        let ps = crate::data::synth_uniform(n, cfg.d, instance_seed)?;
        let table = build_table(&ps, k)?;
        reports.push(verify_bounds(&ps, &table, b, cfg.eps_x, instance_seed)?);
    }
    Ok(reports)
}

/// CSV rendering of a sweep, one row per instance.
pub fn sweep_to_csv(reports: &[BoundReport]) -> String {
    let mut out = String::from(BoundReport::CSV_HEADER);
    out.push('\n');
    for (i, r) in reports.iter().enumerate() {
        out.push_str(&r.csv_row(i));
        out.push('\n');
    }
    out
}
