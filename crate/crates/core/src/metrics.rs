//! Fill distance, estimated weighted fill distance, prediction-error
//! metrics, and the distance-label correlation diagnostic.

use std::fmt::Write as _;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::PointSet;
use crate::error::{Error, Result};
use crate::knn::NeighborTable;

/// Default cap on correlation pairs; keeps the diagnostic sub-second.
pub const DEFAULT_MAX_PAIRS: usize = 2_000_000;

/// Max over pool points of the distance to the nearest selected point.
pub fn fill_distance(ps: &PointSet, selected: &[usize]) -> Result<f64> {
    let min_dists = min_dists_to(ps, selected)?;
    Ok(min_dists.into_iter().fold(0.0f64, f64::max))
}

/// Estimated weighted fill distance of `selected`: max over pool points of
/// `omega * distance to nearest selected point`, with omega the ball count
/// at the adaptive radius derived from `table` (k = `table.k()`).
///
/// Computed fresh from the selection, independently of any incremental
/// greedy state.
pub fn estimated_wfd(
    ps: &PointSet,
    table: &NeighborTable,
    selected: &[usize],
    eps_x: f64,
) -> Result<f64> {
    if table.len() != ps.len() {
        return Err(Error::InvalidParameter(format!(
            "neighbor table built for n={}, pool has n={}",
            table.len(),
            ps.len()
        )));
    }
    if eps_x <= 0.0 || !eps_x.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eps_x must be a small positive real, got {eps_x}"
        )));
    }
    let min_dists = min_dists_to(ps, selected)?;
    let eps_term = eps_x / selected.len() as f64;
    Ok(min_dists
        .par_iter()
        .enumerate()
        .map(|(i, &md)| {
            let r = (md + eps_term).min(table.rho_k(i));
            table.count_within(i, r) as f64 * md
        })
        .reduce(|| 0.0, f64::max))
}

fn min_dists_to(ps: &PointSet, selected: &[usize]) -> Result<Vec<f64>> {
    if selected.is_empty() {
        return Err(Error::InvalidParameter(
            "fill distance needs a nonempty selection".into(),
        ));
    }
    for &s in selected {
        if s >= ps.len() {
            return Err(Error::InvalidParameter(format!(
                "selected index {s} out of range for n={}",
                ps.len()
            )));
        }
    }
    Ok((0..ps.len())
        .into_par_iter()
        .map(|i| {
            selected
                .iter()
                .map(|&s| ps.sq_dist(i, s))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect())
}

/// Per-seed error triple inside an aggregate report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedErrors {
    pub seed: u64,
    pub mae: f64,
    pub rmse: f64,
    pub maxae: f64,
}

/// Prediction-error summary over an evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub rmse: f64,
    pub maxae: f64,
    pub n_eval: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_seed: Option<Vec<SeedErrors>>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One-line CSV row: method, budget, seed, mae, rmse, maxae.
    pub fn csv_row(&self, method: &str, budget: f64, seed: u64) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{method},{budget},{seed},{},{},{}",
            self.mae, self.rmse, self.maxae
        );
        s
    }
}

/// MAE, RMSE and MAXAE of predictions against true labels.
pub fn eval_errors(true_labels: &[f64], predicted: &[f64]) -> Result<EvalReport> {
    if true_labels.len() != predicted.len() {
        return Err(Error::InvalidParameter(format!(
            "{} labels vs {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    if true_labels.is_empty() {
        return Err(Error::InvalidParameter("no points to evaluate".into()));
    }
    let n = true_labels.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut maxae = 0.0f64;
    for (y, p) in true_labels.iter().zip(predicted) {
        let r = (y - p).abs();
        abs_sum += r;
        sq_sum += r * r;
        maxae = maxae.max(r);
    }
    Ok(EvalReport {
        mae: abs_sum / n,
        rmse: (sq_sum / n).sqrt(),
        maxae,
        n_eval: true_labels.len(),
        per_seed: None,
    })
}

/// Pearson and Spearman correlation between pairwise feature distances and
/// pairwise absolute label differences. `degenerate` is set (and the
/// coefficients are absent) when either list has zero variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub n_pairs: usize,
    pub degenerate: bool,
}

/// Distance-label correlation diagnostic.
///
/// All n*(n-1)/2 pairs are used unless that exceeds `max_pairs`, in which
/// case a seeded uniform subsample of pairs is drawn. Label distances are
/// raw absolute differences.
pub fn distance_label_correlation(
    ps: &PointSet,
    max_pairs: usize,
    seed: u64,
) -> Result<CorrelationReport> {
    let n = ps.len();
    let Some(labels) = ps.labels() else {
        return Err(Error::InvalidParameter(
            "correlation diagnostic needs labels".into(),
        ));
    };
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "correlation diagnostic needs n >= 3, got {n}"
        )));
    }
    if max_pairs == 0 {
        return Err(Error::InvalidParameter("max_pairs must be >= 1".into()));
    }

    let total_pairs = n * (n - 1) / 2;
    let mut feat = Vec::new();
    let mut lab = Vec::new();
    if total_pairs <= max_pairs {
        feat.reserve(total_pairs);
        lab.reserve(total_pairs);
        for i in 0..n {
            for j in (i + 1)..n {
                feat.push(ps.dist(i, j));
                lab.push((labels[i] - labels[j]).abs());
            }
        }
    } else {
        let mut rng = StdRng::seed_from_u64(seed);
        feat.reserve(max_pairs);
        lab.reserve(max_pairs);
        for _ in 0..max_pairs {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            feat.push(ps.dist(i, j));
            lab.push((labels[i] - labels[j]).abs());
        }
    }

    let pearson = pearson_correlation(&feat, &lab);
    let spearman = if pearson.is_some() {
        let rf = average_ranks(&feat);
        let rl = average_ranks(&lab);
        pearson_correlation(&rf, &rl)
    } else {
        None
    };
    let degenerate = pearson.is_none() || spearman.is_none();
    Ok(CorrelationReport {
        pearson,
        spearman,
        n_pairs: feat.len(),
        degenerate,
    })
}

/// Pearson correlation; `None` when either side has zero variance.
fn pearson_correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        None
    } else {
        Some(sxy / (sxx.sqrt() * syy.sqrt()))
    }
}

/// Ranks with ties assigned the average rank of their run.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}
