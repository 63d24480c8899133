//! Adaptive kNN density estimates, the estimated weight function, and the
//! integer ball-count weights omega that drive the density-aware selector.
//!
//! For a pool point x with selected set L, the adaptive radius is
//! `r = min(min-dist-to-L + eps_x / |L|, rho_k(x))` and omega counts the
//! pool points inside the closed ball of radius r. Counting happens against
//! the point's sorted neighbor row, which is exact for r <= rho_k except
//! for ties at exactly rho_k that fell outside the stored k entries; those
//! are dropped, keeping omega <= k.

use rayon::prelude::*;

use crate::data::{sq_dist, PointSet};
use crate::error::{Error, Result};
use crate::knn::NeighborTable;

/// Default for the small positive scalar in the adaptive radius.
pub const DEFAULT_EPS_X: f64 = 1e-9;

/// Volume of the unit ball in `R^d`: pi^(d/2) / Gamma(d/2 + 1).
pub fn unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    (half * std::f64::consts::PI.ln() - libm::lgamma(half + 1.0)).exp()
}

/// Live greedy state: the selected sequence with per-point nearest-selected
/// distances and cached radius/omega values.
///
/// Mutation happens through [`WeightState::push`], owned by a single
/// coordinator; the per-point refresh fans out over disjoint slots.
#[derive(Debug, Clone)]
pub struct WeightState {
    selected: Vec<usize>,
    is_selected: Vec<bool>,
    min_dist: Vec<f64>,
    radius: Vec<f64>,
    omega: Vec<u32>,
    k: usize,
    eps_x: f64,
}

impl WeightState {
    /// Empty-selection state: min-dist is +inf and every omega equals `k`.
    pub fn new(n: usize, k: usize, eps_x: f64) -> Result<Self> {
        if eps_x <= 0.0 || !eps_x.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eps_x must be a small positive real, got {eps_x}"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        Ok(Self {
            selected: Vec::new(),
            is_selected: vec![false; n],
            min_dist: vec![f64::INFINITY; n],
            radius: vec![f64::INFINITY; n],
            omega: vec![k as u32; n],
            k,
            eps_x,
        })
    }

    pub fn len_pool(&self) -> usize {
        self.min_dist.len()
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.is_selected[i]
    }

    /// Per-point selected flags, indexed by pool index.
    pub fn selected_flags(&self) -> &[bool] {
        &self.is_selected
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps_x(&self) -> f64 {
        self.eps_x
    }

    /// Distance from point `i` to its nearest selected point (+inf while
    /// the selection is empty).
    #[inline]
    pub fn min_dist(&self, i: usize) -> f64 {
        self.min_dist[i]
    }

    /// Cached adaptive radius of point `i` (+inf while the selection is empty).
    #[inline]
    pub fn radius(&self, i: usize) -> f64 {
        self.radius[i]
    }

    /// Cached omega weight of point `i`.
    #[inline]
    pub fn omega(&self, i: usize) -> usize {
        self.omega[i] as usize
    }

    /// Appends `idx` to the selection and refreshes min-dist for every pool
    /// point, then radius and omega from the neighbor rows.
    pub fn push(&mut self, idx: usize, ps: &PointSet, table: &NeighborTable) {
        self.push_min_dist(idx, ps);
        self.refresh_weights(table);
    }

    /// Min-dist-only update, for callers that run with unit weights.
    pub fn push_min_dist(&mut self, idx: usize, ps: &PointSet) {
        debug_assert!(!self.is_selected[idx], "point {idx} selected twice");
        self.selected.push(idx);
        self.is_selected[idx] = true;
        let new = ps.point(idx);
        self.min_dist
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, md)| {
                let dist = sq_dist(ps.point(i), new).sqrt();
                if dist < *md {
                    *md = dist;
                }
            });
    }

    /// Re-derives radius and omega for every point from the current
    /// min-dist values, via binary search in each sorted neighbor row.
    pub fn refresh_weights(&mut self, table: &NeighborTable) {
        let len = self.selected.len();
        debug_assert!(len > 0);
        let eps_term = self.eps_x / len as f64;
        let min_dist = &self.min_dist;
        self.radius
            .par_iter_mut()
            .zip(self.omega.par_iter_mut())
            .enumerate()
            .for_each(|(i, (radius, omega))| {
                let r = (min_dist[i] + eps_term).min(table.rho_k(i));
                *radius = r;
                *omega = table.count_within(i, r) as u32;
            });
    }
}

/// Adaptive neighborhood size of point `i` under the current selection:
/// `min(min_dist + eps_x/|L|, rho_k)`. Errors while the selection is empty
/// (callers use the omega = k convention instead).
pub fn adaptive_radius(i: usize, state: &WeightState, table: &NeighborTable) -> Result<f64> {
    let len = state.selected().len();
    if len == 0 {
        return Err(Error::InvalidParameter(
            "adaptive radius is undefined for an empty selection".into(),
        ));
    }
    let eps_term = state.eps_x() / len as f64;
    Ok((state.min_dist(i) + eps_term).min(table.rho_k(i)))
}

/// Ball-count weight of point `i`: the number of pool points within the
/// closed adaptive radius, in `[1, k]`; equals `k` for an empty selection.
pub fn omega(i: usize, state: &WeightState, table: &NeighborTable) -> usize {
    if state.selected().is_empty() {
        return state.k();
    }
    let r = (state.min_dist(i) + state.eps_x() / state.selected().len() as f64).min(table.rho_k(i));
    table.count_within(i, r)
}

/// A nonnegative finite density value attached to a pool index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    pub at_index: usize,
}

/// Pool-density estimate at pool point `i`: (points within r) divided by
/// `n * V_d * r^d`.
pub fn estimate_density_pool(
    i: usize,
    state: &WeightState,
    table: &NeighborTable,
    ps: &PointSet,
) -> Result<DensityEstimate> {
    let r = adaptive_radius(i, state, table)?;
    let count = table.count_within(i, r);
    density_from_count(count, ps.len(), r, ps.dim(), i)
}

/// Selected-set density estimate at pool point `i`: (selected points within
/// r) divided by `|L| * V_d * r^d`.
pub fn estimate_density_selected(
    i: usize,
    state: &WeightState,
    table: &NeighborTable,
    ps: &PointSet,
) -> Result<DensityEstimate> {
    let r = adaptive_radius(i, state, table)?;
    let count = count_selected_within(i, state, table, r);
    density_from_count(count, state.selected().len(), r, ps.dim(), i)
}

fn count_selected_within(i: usize, state: &WeightState, table: &NeighborTable, r: f64) -> usize {
    let in_ball = table.count_within(i, r);
    table.row_ids(i)[..in_ball]
        .iter()
        .filter(|&&id| state.is_selected(id as usize))
        .count()
}

fn density_from_count(
    count: usize,
    set_size: usize,
    r: f64,
    d: usize,
    at_index: usize,
) -> Result<DensityEstimate> {
    if r <= 0.0 {
        return Err(Error::Degenerate(format!(
            "adaptive radius is zero at point {at_index}; density undefined"
        )));
    }
    let denom = set_size as f64 * unit_ball_volume(d) * r.powi(d as i32);
    let value = count as f64 / denom;
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "density estimate overflowed at point {at_index} (r={r}, d={d})"
        )));
    }
    Ok(DensityEstimate { value, at_index })
}

/// Estimated weight function `1 - p_hat_L(x_i) / p_hat_D(x_i)`.
///
/// Both estimates share the same radius, so the normalizations cancel and
/// the ratio reduces to counts: `1 - (c_L * n) / (c_D * |L|)`. The value is
/// 1 exactly when no selected point lies in the k-neighborhood, and may be
/// negative where the selection is locally denser than the pool.
pub fn estimated_weight(
    i: usize,
    state: &WeightState,
    table: &NeighborTable,
    ps: &PointSet,
) -> Result<f64> {
    let r = adaptive_radius(i, state, table)?;
    let c_pool = table.count_within(i, r);
    if c_pool == 0 {
        return Err(Error::Degenerate(format!(
            "pool density estimate is zero at point {i}"
        )));
    }
    let c_sel = count_selected_within(i, state, table, r);
    let n = ps.len() as f64;
    let l = state.selected().len() as f64;
    Ok(1.0 - (c_sel as f64 * n) / (c_pool as f64 * l))
}
