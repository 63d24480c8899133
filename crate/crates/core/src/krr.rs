//! Kernel ridge regression with Gaussian and Cauchy kernels: closed-form
//! training via a Cholesky solve, prediction, and the cross-validation
//! grid protocol used to fix hyperparameters before method comparisons.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, PointSet};
use crate::error::{Error, Result};

/// Relative residual bound every fit must meet: ||(K+lambda I)a - y|| <=
/// RESIDUAL_TOL * ||y||.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Jitter escalation ladder for ill-conditioned kernel matrices.
const JITTERS: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Similarity kernel; widths are validated at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Kernel {
    /// exp(-gamma * ||xa - xb||^2)
    Gaussian { gamma: f64 },
    /// 1 / (1 + (||xa - xb|| / gamma_c)^2)
    Cauchy { gamma_c: f64 },
}

impl Kernel {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian kernel width must be positive, got {gamma}"
            )));
        }
        Ok(Kernel::Gaussian { gamma })
    }

    pub fn cauchy(gamma_c: f64) -> Result<Self> {
        if gamma_c <= 0.0 || !gamma_c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cauchy kernel width must be positive, got {gamma_c}"
            )));
        }
        Ok(Kernel::Cauchy { gamma_c })
    }

    /// Kernel family with a replaced width, used by the grid search.
    fn with_width(self, w: f64) -> Result<Self> {
        match self {
            Kernel::Gaussian { .. } => Kernel::gaussian(w),
            Kernel::Cauchy { .. } => Kernel::cauchy(w),
        }
    }

    pub fn width(&self) -> f64 {
        match *self {
            Kernel::Gaussian { gamma } => gamma,
            Kernel::Cauchy { gamma_c } => gamma_c,
        }
    }
}

/// Kernel similarity in (0, 1].
#[inline]
pub fn kernel_value(kind: &Kernel, xa: &[f64], xb: &[f64]) -> f64 {
    let d2 = sq_dist(xa, xb);
    match *kind {
        Kernel::Gaussian { gamma } => (-gamma * d2).exp(),
        Kernel::Cauchy { gamma_c } => 1.0 / (1.0 + d2 / (gamma_c * gamma_c)),
    }
}

/// Trained model: dual weights over a training subset of a pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrModel {
    pub kernel: Kernel,
    pub train_indices: Vec<usize>,
    pub alpha: Vec<f64>,
    pub lambda: f64,
}

/// Solves `(K + lambda I) alpha = y` on the training subset.
///
/// The symmetric positive-definite solve escalates a diagonal jitter
/// (1e-10 up to 1e-6) until the factorization succeeds and the residual
/// meets [`RESIDUAL_TOL`]; otherwise the fit fails.
pub fn krr_fit(
    ps: &PointSet,
    train_indices: &[usize],
    kind: Kernel,
    lambda: f64,
) -> Result<KrrModel> {
    let Some(labels) = ps.labels() else {
        return Err(Error::InvalidParameter("kernel fit needs labels".into()));
    };
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ridge regularizer must be positive, got {lambda}"
        )));
    }
    let b = train_indices.len();
    if b == 0 {
        return Err(Error::InvalidParameter("empty training subset".into()));
    }
    {
        let mut seen = vec![false; ps.len()];
        for &i in train_indices {
            if i >= ps.len() {
                return Err(Error::InvalidParameter(format!(
                    "training index {i} out of range for n={}",
                    ps.len()
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!(
                    "training index {i} repeated"
                )));
            }
        }
    }

    let y: Vec<f64> = train_indices.iter().map(|&i| labels[i]).collect();
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();

    // symmetric kernel matrix with unit diagonal
    let mut base = vec![0.0f64; b * b];
    base.par_chunks_mut(b).enumerate().for_each(|(r, row)| {
        let xr = ps.point(train_indices[r]);
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = kernel_value(&kind, xr, ps.point(train_indices[c]));
        }
    });

    for jitter in JITTERS {
        let mut a = base.clone();
        for i in 0..b {
            a[i * b + i] += lambda + jitter;
        }
        if let Some(alpha) = cholesky_solve(&mut a, b, &y) {
            // residual against the unjittered system
            let mut resid = 0.0;
            for r in 0..b {
                let mut acc = 0.0;
                for c in 0..b {
                    acc += base[r * b + c] * alpha[c];
                }
                acc += lambda * alpha[r];
                let diff = acc - y[r];
                resid += diff * diff;
            }
            if resid.sqrt() <= RESIDUAL_TOL * y_norm.max(f64::MIN_POSITIVE) {
                return Ok(KrrModel {
                    kernel: kind,
                    train_indices: train_indices.to_vec(),
                    alpha,
                    lambda,
                });
            }
        }
    }
    Err(Error::Numerical(format!(
        "kernel system of size {b} failed the residual bound after jitter escalation"
    )))
}

/// In-place Cholesky factorization and solve; `None` on a non-positive
/// pivot.
fn cholesky_solve(a: &mut [f64], n: usize, y: &[f64]) -> Option<Vec<f64>> {
    // factor A = L L^T, L stored in the lower triangle
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    // forward substitution L z = y
    let mut z = vec![0.0f64; n];
    for i in 0..n {
        let mut v = y[i];
        for k in 0..i {
            v -= a[i * n + k] * z[k];
        }
        z[i] = v / a[i * n + i];
    }
    // back substitution L^T x = z
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut v = z[i];
        for k in (i + 1)..n {
            v -= a[k * n + i] * x[k];
        }
        x[i] = v / a[i * n + i];
    }
    Some(x)
}

/// Predicts labels at the given pool indices: sum_j alpha_j k(x, x_j).
pub fn krr_predict(model: &KrrModel, ps: &PointSet, query_indices: &[usize]) -> Result<Vec<f64>> {
    for &q in query_indices {
        if q >= ps.len() {
            return Err(Error::InvalidParameter(format!(
                "query index {q} out of range for n={}",
                ps.len()
            )));
        }
    }
    Ok(query_indices
        .par_iter()
        .map(|&q| {
            let xq = ps.point(q);
            model
                .train_indices
                .iter()
                .zip(&model.alpha)
                .map(|(&t, &a)| a * kernel_value(&model.kernel, xq, ps.point(t)))
                .sum()
        })
        .collect())
}

/// Hyperparameter grid for [`cv_grid_search`]: width values x lambda
/// values, searched in row-major (width-major) order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub widths: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl GridSpec {
    /// Six log-spaced values per parameter from 1e-6 to 1e-1.
    pub fn gaussian_default() -> Self {
        Self {
            widths: log_space(1e-6, 1e-1, 6),
            lambdas: log_space(1e-6, 1e-1, 6),
        }
    }

    /// Six log-spaced values per parameter from 1e-6 to 1e-2.
    pub fn cauchy_default() -> Self {
        Self {
            widths: log_space(1e-6, 1e-2, 6),
            lambdas: log_space(1e-6, 1e-2, 6),
        }
    }

    pub fn cells(&self) -> usize {
        self.widths.len() * self.lambdas.len()
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Outcome of the cross-validation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Final kernel width: geometric mean of the per-budget best widths.
    pub width: f64,
    /// Final ridge regularizer: geometric mean of the per-budget bests.
    pub lambda: f64,
    /// Per-budget winning (width, lambda) pairs, in budget order.
    pub per_budget_best: Vec<(f64, f64)>,
}

/// Cross-validation tensor-grid search.
///
/// For each budget, a seeded random training subset is drawn and every
/// grid cell scored by k-fold CV mean MAE (ties: first cell in width-major
/// order). The final pair averages the per-budget winners coordinate-wise
/// in log space, matching the log-spaced grid.
pub fn cv_grid_search(
    ps: &PointSet,
    budgets: &[usize],
    kind: Kernel,
    grid: &GridSpec,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if ps.labels().is_none() {
        return Err(Error::InvalidParameter("grid search needs labels".into()));
    }
    if budgets.is_empty() || grid.widths.is_empty() || grid.lambdas.is_empty() {
        return Err(Error::InvalidParameter(
            "grid search needs at least one budget and a nonempty grid".into(),
        ));
    }
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "cross-validation needs folds >= 2, got {folds}"
        )));
    }
    let labels = ps.labels().unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut per_budget_best = Vec::with_capacity(budgets.len());

    for &b in budgets {
        if b < folds {
            return Err(Error::InvalidParameter(format!(
                "budget {b} cannot populate {folds} folds"
            )));
        }
        let subset = crate::select::select_random(ps, b, rng.gen::<u64>())?.indices;
        let mut shuffled = subset;
        shuffled.shuffle(&mut rng);

        // fold f owns the f-th contiguous chunk
        let fold_of = |pos: usize| pos * folds / shuffled.len();

        let mut best: Option<(f64, (f64, f64))> = None;
        for &w in &grid.widths {
            let cell_kernel = kind.with_width(w)?;
            for &lam in &grid.lambdas {
                let mut fold_mae_sum = 0.0;
                for f in 0..folds {
                    let train: Vec<usize> = shuffled
                        .iter()
                        .enumerate()
                        .filter(|&(pos, _)| fold_of(pos) != f)
                        .map(|(_, &i)| i)
                        .collect();
                    let val: Vec<usize> = shuffled
                        .iter()
                        .enumerate()
                        .filter(|&(pos, _)| fold_of(pos) == f)
                        .map(|(_, &i)| i)
                        .collect();
                    if train.is_empty() || val.is_empty() {
                        return Err(Error::Degenerate(format!(
                            "fold {f} of {folds} is empty for budget {b}"
                        )));
                    }
                    let model = krr_fit(ps, &train, cell_kernel, lam)?;
                    let preds = krr_predict(&model, ps, &val)?;
                    let truth: Vec<f64> = val.iter().map(|&i| labels[i]).collect();
                    fold_mae_sum += crate::metrics::eval_errors(&truth, &preds)?.mae;
                }
                let score = fold_mae_sum / folds as f64;
                if best.as_ref().map_or(true, |(s, _)| score < *s) {
                    best = Some((score, (w, lam)));
                }
            }
        }
        per_budget_best.push(best.expect("nonempty grid").1);
    }

    let geo = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        let (sum, count) = vals.fold((0.0, 0usize), |(s, c), v| (s + v.ln(), c + 1));
        (sum / count as f64).exp()
    };
    let width = geo(&mut per_budget_best.iter().map(|p| p.0));
    let lambda = geo(&mut per_budget_best.iter().map(|p| p.1));
    Ok(CvResult {
        width,
        lambda,
        per_budget_best,
    })
}
