//! Training-set selection strategies: density-aware farthest point sampling
//! and the baselines it is compared against.
//!
//! Every selector returns a [`Selection`] with distinct indices, is
//! deterministic under a fixed seed, and breaks score ties by lowest pool
//! index.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sq_dist, PointSet};
use crate::density::WeightState;
use crate::error::{Error, Result};
use crate::knn::NeighborTable;

/// Selection strategy identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    Fps,
    Dafps,
    Kmedoidspp,
    FacilitySqdist,
    FacilityGauss,
    FpsPrefixed,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Random => "random",
            Method::Fps => "fps",
            Method::Dafps => "dafps",
            Method::Kmedoidspp => "kmedoidspp",
            Method::FacilitySqdist => "facility_sqdist",
            Method::FacilityGauss => "facility_gauss",
            Method::FpsPrefixed => "fps_prefixed",
        };
        f.write_str(s)
    }
}

/// Inner strategy for the FPS-prefixed hybrids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    Random,
    Kmedoidspp,
    FacilitySqdist,
    FacilityGauss,
}

/// Method-specific parameters recorded with a selection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub b: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub u: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub initial: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inner: Option<InnerMethod>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub unit_weights: bool,
}

/// One greedy iteration: the pick, its greedy criterion value (`None` for
/// seeded or externally supplied picks), and the selector's objective on
/// the set after the pick (estimated weighted fill distance for dafps,
/// plain fill distance otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub chosen: usize,
    pub score: Option<f64>,
    pub wfd: f64,
}

/// Final artifact of a selection run.
///
/// Serializes to a single JSON document `{method, params, seed, indices,
/// trace}`. Non-sequential methods (random, k-medoids++) leave the trace
/// empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub method: Method,
    pub params: SelectionParams,
    pub seed: u64,
    pub indices: Vec<usize>,
    pub trace: Vec<TraceEntry>,
}

impl Selection {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_budget(b: usize, n: usize) -> Result<()> {
    if b < 1 || b > n {
        return Err(Error::InvalidParameter(format!(
            "budget must satisfy 1 <= b <= n, got b={b}, n={n}"
        )));
    }
    Ok(())
}

/// Deterministic argmax over unselected points: highest score wins, ties by
/// lowest index. Scores must be NaN-free. The reduction is a max under a
/// total order, so the parallel evaluation order cannot change the result.
fn argmax_unselected(scores: &[f64], selected: &[bool]) -> usize {
    scores
        .par_iter()
        .copied()
        .enumerate()
        .filter(|&(i, _)| !selected[i])
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        )
        .0
}

#[cfg(test)]
fn argmax_unselected_seq(scores: &[f64], selected: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if !selected[i] && s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Uniform sample of `b` distinct indices, in draw order.
pub fn select_random(ps: &PointSet, b: usize, seed: u64) -> Result<Selection> {
    check_budget(b, ps.len())?;
    let mut rng = StdRng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, ps.len(), b).into_vec();
    Ok(Selection {
        method: Method::Random,
        params: SelectionParams {
            b,
            ..Default::default()
        },
        seed,
        indices,
        trace: Vec::new(),
    })
}

/// Greedy max-min (farthest point) sampling. The first point is `start` or
/// a seeded random draw; each further point maximizes the distance to its
/// nearest selected point, ties by lowest index.
pub fn select_fps(ps: &PointSet, b: usize, start: Option<usize>, seed: u64) -> Result<Selection> {
    let n = ps.len();
    check_budget(b, n)?;
    if let Some(s) = start {
        if s >= n {
            return Err(Error::InvalidParameter(format!(
                "start index {s} out of range for n={n}"
            )));
        }
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let first = start.unwrap_or_else(|| rng.gen_range(0..n));

    let mut selected = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    let mut indices = Vec::with_capacity(b);
    let mut trace = Vec::with_capacity(b);

    let push = |idx: usize,
                score: Option<f64>,
                selected: &mut Vec<bool>,
                min_dist: &mut Vec<f64>,
                indices: &mut Vec<usize>,
                trace: &mut Vec<TraceEntry>| {
        selected[idx] = true;
        indices.push(idx);
        let q = ps.point(idx);
        min_dist.par_iter_mut().enumerate().for_each(|(i, md)| {
            let d = sq_dist(ps.point(i), q).sqrt();
            if d < *md {
                *md = d;
            }
        });
        let fill = min_dist.iter().cloned().fold(0.0f64, f64::max);
        trace.push(TraceEntry {
            iter: indices.len() - 1,
            chosen: idx,
            score,
            wfd: fill,
        });
    };

    push(
        first,
        None,
        &mut selected,
        &mut min_dist,
        &mut indices,
        &mut trace,
    );
    while indices.len() < b {
        let next = argmax_unselected(&min_dist, &selected);
        let score = min_dist[next];
        push(
            next,
            Some(score),
            &mut selected,
            &mut min_dist,
            &mut indices,
            &mut trace,
        );
    }

    Ok(Selection {
        method: Method::Fps,
        params: SelectionParams {
            b,
            start,
            ..Default::default()
        },
        seed,
        indices,
        trace,
    })
}

/// Configuration for [`select_dafps`].
#[derive(Debug, Clone)]
pub struct DafpsConfig {
    pub b: usize,
    /// Number of leading picks made with uniform weights (pure FPS phase).
    pub u: usize,
    /// Warm-start indices; selected verbatim before the greedy loop.
    pub initial: Vec<usize>,
    pub eps_x: f64,
    pub seed: u64,
    /// Forces omega == 1 everywhere (the k-equivalent-to-1 regime in which
    /// the algorithm reduces to plain FPS). No neighbor table is consulted.
    pub unit_weights: bool,
}

impl DafpsConfig {
    pub fn new(b: usize, u: usize, seed: u64) -> Self {
        Self {
            b,
            u,
            initial: Vec::new(),
            eps_x: crate::density::DEFAULT_EPS_X,
            seed,
            unit_weights: false,
        }
    }
}

/// Density-aware farthest point sampling.
///
/// While fewer than `u` points are selected the greedy criterion is the
/// plain max-min distance; afterwards every iteration recomputes the omega
/// weights for the current selection and picks the unselected point with
/// the largest `min_dist * omega`. The trace records the estimated weighted
/// fill distance of the growing set, which is nonincreasing.
///
/// `table` is required unless `cfg.unit_weights` is set.
pub fn select_dafps(
    ps: &PointSet,
    table: Option<&NeighborTable>,
    cfg: &DafpsConfig,
) -> Result<Selection> {
    let n = ps.len();
    check_budget(cfg.b, n)?;
    if cfg.u >= cfg.b {
        return Err(Error::InvalidParameter(format!(
            "uniform-weight phase must satisfy u < b, got u={}, b={}",
            cfg.u, cfg.b
        )));
    }
    let table = match (cfg.unit_weights, table) {
        (true, _) => None,
        (false, Some(t)) => {
            if t.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "neighbor table built for n={}, pool has n={n}",
                    t.len()
                )));
            }
            Some(t)
        }
        (false, None) => {
            return Err(Error::InvalidParameter(
                "density-aware selection needs a neighbor table".into(),
            ))
        }
    };
    if cfg.initial.len() > cfg.b {
        return Err(Error::InvalidParameter(format!(
            "initial set of {} exceeds budget {}",
            cfg.initial.len(),
            cfg.b
        )));
    }
    {
        let mut seen = vec![false; n];
        for &i in &cfg.initial {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "initial index {i} out of range for n={n}"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!(
                    "initial index {i} repeated"
                )));
            }
        }
    }

    let k_state = if cfg.unit_weights {
        1
    } else {
        table.unwrap().k()
    };
    let mut state = WeightState::new(n, k_state, cfg.eps_x)?;
    let mut indices = Vec::with_capacity(cfg.b);
    let mut trace = Vec::with_capacity(cfg.b);

    let push = |idx: usize,
                score: Option<f64>,
                state: &mut WeightState,
                indices: &mut Vec<usize>,
                trace: &mut Vec<TraceEntry>| {
        match table {
            Some(t) => state.push(idx, ps, t),
            None => state.push_min_dist(idx, ps),
        }
        indices.push(idx);
        // unit-weight runs never refresh the omega cache, which stays at 1
        let wfd = (0..n)
            .map(|i| state.min_dist(i) * state.omega(i) as f64)
            .fold(0.0f64, f64::max);
        trace.push(TraceEntry {
            iter: indices.len() - 1,
            chosen: idx,
            score,
            wfd,
        });
    };

    if cfg.initial.is_empty() {
        let mut rng = StdRng::seed_from_u64(cfg.seed);
        let first = rng.gen_range(0..n);
        push(first, None, &mut state, &mut indices, &mut trace);
    } else {
        for &i in &cfg.initial {
            push(i, None, &mut state, &mut indices, &mut trace);
        }
    }

    let mut scores = vec![0.0f64; n];
    while indices.len() < cfg.b {
        let uniform_phase = indices.len() < cfg.u;
        if uniform_phase || table.is_none() {
            scores
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, s)| *s = state.min_dist(i));
        } else {
            scores
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, s)| *s = state.min_dist(i) * state.omega(i) as f64);
        }
        let next = argmax_unselected(&scores, state.selected_flags());
        let score = scores[next];
        push(next, Some(score), &mut state, &mut indices, &mut trace);
    }

    Ok(Selection {
        method: Method::Dafps,
        params: SelectionParams {
            b: cfg.b,
            k: table.map(|t| t.k()),
            u: Some(cfg.u),
            eps_x: Some(cfg.eps_x),
            initial: cfg.initial.clone(),
            unit_weights: cfg.unit_weights,
            ..Default::default()
        },
        seed: cfg.seed,
        indices,
        trace,
    })
}

/// k-medoids with squared-distance-proportional (++-style) seeding and
/// exact alternating refinement on the summed-Euclidean-distance objective.
pub fn select_kmedoidspp(
    ps: &PointSet,
    b: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Selection> {
    let n = ps.len();
    check_budget(b, n)?;
    let mut rng = StdRng::seed_from_u64(seed);

    let mut medoids = Vec::with_capacity(b);
    let mut is_medoid = vec![false; n];
    let first = rng.gen_range(0..n);
    medoids.push(first);
    is_medoid[first] = true;

    // D^2 seeding
    let mut d2: Vec<f64> = (0..n).map(|i| ps.sq_dist(i, first)).collect();
    while medoids.len() < b {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let t = rng.gen_range(0.0..total);
            let mut cum = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    cum += w;
                    if cum > t {
                        chosen = Some(i);
                        break;
                    }
                }
            }
            // rounding at the top of the cumulative scan falls back to the
            // last positive-weight candidate
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // remaining points duplicate the medoids; take the lowest index
            (0..n)
                .find(|&i| !is_medoid[i])
                .expect("b <= n leaves an unselected point")
        };
        medoids.push(pick);
        is_medoid[pick] = true;
        for i in 0..n {
            let d = ps.sq_dist(i, pick);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    // alternating assignment / exact medoid update
    let mut assign = vec![0usize; n];
    for _ in 0..max_iters {
        assign.par_iter_mut().enumerate().for_each(|(i, a)| {
            let mut best_slot = 0usize;
            let mut best = (f64::INFINITY, usize::MAX);
            for (slot, &m) in medoids.iter().enumerate() {
                let cand = (ps.dist(i, m), m);
                if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                    best = cand;
                    best_slot = slot;
                }
            }
            *a = best_slot;
        });

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); b];
        for (i, &a) in assign.iter().enumerate() {
            members[a].push(i);
        }

        let new_medoids: Vec<usize> = medoids
            .par_iter()
            .enumerate()
            .map(|(slot, &old)| {
                let cluster = &members[slot];
                if cluster.is_empty() {
                    return old;
                }
                let mut best = old;
                let mut best_cost = f64::INFINITY;
                for &cand in cluster {
                    let cost: f64 = cluster.iter().map(|&j| ps.dist(cand, j)).sum();
                    if cost < best_cost || (cost == best_cost && cand < best) {
                        best_cost = cost;
                        best = cand;
                    }
                }
                best
            })
            .collect();

        if new_medoids == medoids {
            break;
        }
        medoids = new_medoids;
    }

    Ok(Selection {
        method: Method::Kmedoidspp,
        params: SelectionParams {
            b,
            max_iters: Some(max_iters),
            ..Default::default()
        },
        seed,
        indices: medoids,
        trace: Vec::new(),
    })
}

/// Objective flavor for [`select_facility_location`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FacilityVariant {
    /// Greedily minimize the summed squared distance to the nearest
    /// selected point.
    Sqdist,
    /// Greedily maximize the facility-location value of the Gaussian
    /// similarity `exp(-gamma * ||x - s||)`.
    Gauss { gamma: f64 },
}

/// Greedy facility-location selection. Fully deterministic; the seed is
/// recorded for provenance only.
pub fn select_facility_location(
    ps: &PointSet,
    b: usize,
    variant: FacilityVariant,
    seed: u64,
) -> Result<Selection> {
    let n = ps.len();
    check_budget(b, n)?;
    if let FacilityVariant::Gauss { gamma } = variant {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian similarity width must be positive, got {gamma}"
            )));
        }
    }

    let mut sel = facility_greedy(ps, b, variant, &[])?;
    let (method, gamma) = match variant {
        FacilityVariant::Sqdist => (Method::FacilitySqdist, None),
        FacilityVariant::Gauss { gamma } => (Method::FacilityGauss, Some(gamma)),
    };
    sel.method = method;
    sel.params = SelectionParams {
        b,
        gamma,
        ..Default::default()
    };
    sel.seed = seed;
    Ok(sel)
}

/// Shared greedy core; `prefix` points are taken as already selected.
fn facility_greedy(
    ps: &PointSet,
    b: usize,
    variant: FacilityVariant,
    prefix: &[usize],
) -> Result<Selection> {
    let n = ps.len();
    let mut selected = vec![false; n];
    let mut indices = Vec::with_capacity(b);
    let mut trace = Vec::with_capacity(b);
    // per-point state: best squared distance (sqdist + fill trace) and best
    // similarity (gauss)
    let mut cur_sq = vec![f64::INFINITY; n];
    let mut cur_sim = vec![0.0f64; n];

    let gamma = match variant {
        FacilityVariant::Gauss { gamma } => gamma,
        FacilityVariant::Sqdist => 0.0,
    };

    let absorb = |idx: usize,
                  score: Option<f64>,
                  selected: &mut Vec<bool>,
                  cur_sq: &mut Vec<f64>,
                  cur_sim: &mut Vec<f64>,
                  indices: &mut Vec<usize>,
                  trace: &mut Vec<TraceEntry>| {
        selected[idx] = true;
        indices.push(idx);
        let q = ps.point(idx);
        let is_gauss = matches!(variant, FacilityVariant::Gauss { .. });
        cur_sq
            .par_iter_mut()
            .zip(cur_sim.par_iter_mut())
            .enumerate()
            .for_each(|(i, (sq, sim))| {
                let d2 = sq_dist(ps.point(i), q);
                if d2 < *sq {
                    *sq = d2;
                }
                if is_gauss {
                    let s = (-gamma * d2.sqrt()).exp();
                    if s > *sim {
                        *sim = s;
                    }
                }
            });
        let fill = cur_sq.iter().cloned().fold(0.0f64, f64::max).sqrt();
        trace.push(TraceEntry {
            iter: indices.len() - 1,
            chosen: idx,
            score,
            wfd: fill,
        });
    };

    for &p in prefix {
        if p >= n {
            return Err(Error::InvalidParameter(format!(
                "prefix index {p} out of range for n={n}"
            )));
        }
        absorb(
            p,
            None,
            &mut selected,
            &mut cur_sq,
            &mut cur_sim,
            &mut indices,
            &mut trace,
        );
    }

    while indices.len() < b {
        let (next, score) = match variant {
            FacilityVariant::Sqdist => {
                // candidate score: resulting total cost (lower is better)
                let costs: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|x| {
                        if selected[x] {
                            return f64::INFINITY;
                        }
                        let xp = ps.point(x);
                        let mut total = 0.0;
                        for y in 0..n {
                            let d2 = sq_dist(ps.point(y), xp);
                            total += if d2 < cur_sq[y] { d2 } else { cur_sq[y] };
                        }
                        total
                    })
                    .collect();
                let neg: Vec<f64> = costs.iter().map(|&c| -c).collect();
                let next = argmax_unselected(&neg, &selected);
                (next, costs[next])
            }
            FacilityVariant::Gauss { gamma } => {
                let gains: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|x| {
                        if selected[x] {
                            return f64::NEG_INFINITY;
                        }
                        let xp = ps.point(x);
                        let mut gain = 0.0;
                        for y in 0..n {
                            let s = (-gamma * sq_dist(ps.point(y), xp).sqrt()).exp();
                            if s > cur_sim[y] {
                                gain += s - cur_sim[y];
                            }
                        }
                        gain
                    })
                    .collect();
                let next = argmax_unselected(&gains, &selected);
                (next, gains[next])
            }
        };
        absorb(
            next,
            Some(score),
            &mut selected,
            &mut cur_sq,
            &mut cur_sim,
            &mut indices,
            &mut trace,
        );
    }

    Ok(Selection {
        method: Method::FacilitySqdist, // overwritten by callers
        params: SelectionParams {
            b,
            ..Default::default()
        },
        seed: 0,
        indices,
        trace,
    })
}

/// First `u` points by farthest point sampling, the remaining `b - u` by
/// the inner method restricted to the unselected pool (facility and
/// k-medoids treat the prefix as fixed selected points/medoids; random
/// draws from the complement).
pub fn fps_prefix_then(
    ps: &PointSet,
    inner: InnerMethod,
    b: usize,
    u: usize,
    gamma: Option<f64>,
    seed: u64,
    max_iters: usize,
) -> Result<Selection> {
    let n = ps.len();
    check_budget(b, n)?;
    if u > b {
        return Err(Error::InvalidParameter(format!(
            "prefix length must satisfy 0 <= u <= b, got u={u}, b={b}"
        )));
    }

    let prefix: Vec<usize> = if u > 0 {
        select_fps(ps, u, None, seed)?.indices
    } else {
        Vec::new()
    };

    let mut indices = prefix.clone();
    if u < b {
        match inner {
            InnerMethod::Random => {
                let mut rng = StdRng::seed_from_u64(seed);
                let mut in_prefix = vec![false; n];
                for &p in &prefix {
                    in_prefix[p] = true;
                }
                let complement: Vec<usize> = (0..n).filter(|&i| !in_prefix[i]).collect();
                let draw = rand::seq::index::sample(&mut rng, complement.len(), b - u).into_vec();
                indices.extend(draw.into_iter().map(|j| complement[j]));
            }
            InnerMethod::FacilitySqdist => {
                indices = facility_greedy(ps, b, FacilityVariant::Sqdist, &prefix)?.indices;
            }
            InnerMethod::FacilityGauss => {
                let gamma = gamma.ok_or_else(|| {
                    Error::InvalidParameter("facility_gauss inner method needs gamma".into())
                })?;
                indices =
                    facility_greedy(ps, b, FacilityVariant::Gauss { gamma }, &prefix)?.indices;
            }
            InnerMethod::Kmedoidspp => {
                indices = kmedoids_with_fixed_prefix(ps, b, &prefix, seed, max_iters)?;
            }
        }
    }

    Ok(Selection {
        method: Method::FpsPrefixed,
        params: SelectionParams {
            b,
            u: Some(u),
            gamma,
            inner: Some(inner),
            max_iters: matches!(inner, InnerMethod::Kmedoidspp).then_some(max_iters),
            ..Default::default()
        },
        seed,
        indices,
        trace: Vec::new(),
    })
}

/// k-medoids++ whose first `prefix.len()` medoids are fixed: seeding is
/// conditioned on them and refinement only moves the free slots.
fn kmedoids_with_fixed_prefix(
    ps: &PointSet,
    b: usize,
    prefix: &[usize],
    seed: u64,
    max_iters: usize,
) -> Result<Vec<usize>> {
    let n = ps.len();
    let fixed = prefix.len();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut medoids: Vec<usize> = prefix.to_vec();
    let mut is_medoid = vec![false; n];
    for &m in prefix {
        is_medoid[m] = true;
    }

    let mut d2: Vec<f64> = (0..n)
        .map(|i| {
            prefix
                .iter()
                .map(|&m| ps.sq_dist(i, m))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    if prefix.is_empty() {
        let first = rng.gen_range(0..n);
        medoids.push(first);
        is_medoid[first] = true;
        for i in 0..n {
            d2[i] = ps.sq_dist(i, first);
        }
    }

    while medoids.len() < b {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let t = rng.gen_range(0.0..total);
            let mut cum = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    cum += w;
                    if cum > t {
                        chosen = Some(i);
                        break;
                    }
                }
            }
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            (0..n).find(|&i| !is_medoid[i]).expect("b <= n")
        };
        medoids.push(pick);
        is_medoid[pick] = true;
        for i in 0..n {
            let d = ps.sq_dist(i, pick);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let mut assign = vec![0usize; n];
    for _ in 0..max_iters {
        assign.par_iter_mut().enumerate().for_each(|(i, a)| {
            let mut best_slot = 0usize;
            let mut best = (f64::INFINITY, usize::MAX);
            for (slot, &m) in medoids.iter().enumerate() {
                let cand = (ps.dist(i, m), m);
                if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                    best = cand;
                    best_slot = slot;
                }
            }
            *a = best_slot;
        });
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); b];
        for (i, &a) in assign.iter().enumerate() {
            members[a].push(i);
        }
        let new_medoids: Vec<usize> = medoids
            .iter()
            .enumerate()
            .map(|(slot, &old)| {
                if slot < fixed || members[slot].is_empty() {
                    return old;
                }
                let cluster = &members[slot];
                let mut best = old;
                let mut best_cost = f64::INFINITY;
                for &cand in cluster {
                    let cost: f64 = cluster.iter().map(|&j| ps.dist(cand, j)).sum();
                    if cost < best_cost || (cost == best_cost && cand < best) {
                        best_cost = cost;
                        best = cand;
                    }
                }
                best
            })
            .collect();
        if new_medoids == medoids {
            break;
        }
        medoids = new_medoids;
    }
    Ok(medoids)
}

/// Per-width greedy gain curve of the Gaussian-similarity facility
/// location objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub gamma: f64,
    pub gains: Vec<f64>,
}

/// For each width in `gamma_grid`, the length-`b` sequence of greedy gains
/// `f(S_{j+1}) - f(S_j)`, every run started from the same `start` point.
pub fn tune_gamma(
    ps: &PointSet,
    b: usize,
    gamma_grid: &[f64],
    start: usize,
) -> Result<Vec<GainCurve>> {
    let n = ps.len();
    check_budget(b, n)?;
    if gamma_grid.is_empty() {
        return Err(Error::InvalidParameter("empty gamma grid".into()));
    }
    if start >= n {
        return Err(Error::InvalidParameter(format!(
            "start index {start} out of range for n={n}"
        )));
    }
    gamma_grid
        .iter()
        .map(|&gamma| {
            if gamma <= 0.0 || !gamma.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "gamma grid values must be positive, got {gamma}"
                )));
            }
            let mut selected = vec![false; n];
            let mut cur_sim = vec![0.0f64; n];
            let mut gains = Vec::with_capacity(b);
            let absorb = |idx: usize, selected: &mut Vec<bool>, cur_sim: &mut Vec<f64>| {
                selected[idx] = true;
                let q = ps.point(idx);
                let mut gain = 0.0;
                for y in 0..n {
                    let s = (-gamma * sq_dist(ps.point(y), q).sqrt()).exp();
                    if s > cur_sim[y] {
                        gain += s - cur_sim[y];
                        cur_sim[y] = s;
                    }
                }
                gain
            };
            gains.push(absorb(start, &mut selected, &mut cur_sim));
            while gains.len() < b {
                let cand_gains: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|x| {
                        if selected[x] {
                            return f64::NEG_INFINITY;
                        }
                        let xp = ps.point(x);
                        let mut g = 0.0;
                        for y in 0..n {
                            let s = (-gamma * sq_dist(ps.point(y), xp).sqrt()).exp();
                            if s > cur_sim[y] {
                                g += s - cur_sim[y];
                            }
                        }
                        g
                    })
                    .collect();
                let next = argmax_unselected(&cand_gains, &selected);
                gains.push(absorb(next, &mut selected, &mut cur_sim));
            }
            Ok(GainCurve { gamma, gains })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PointSet;
    use crate::knn::build_table;

    fn pool_1d(xs: &[f64]) -> PointSet {
        PointSet::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(), None, "t").unwrap()
    }

    #[test]
    fn random_full_budget_is_permutation() {
        let ps = crate::data::synth_uniform(10, 2, 1).unwrap();
        let sel = select_random(&ps, 10, 7).unwrap();
        let mut sorted = sel.indices.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn random_determinism_and_forced_choice() {
        let ps = crate::data::synth_uniform(20, 2, 1).unwrap();
        let a = select_random(&ps, 5, 3).unwrap();
        let b = select_random(&ps, 5, 3).unwrap();
        assert_eq!(a.indices, b.indices);
        let one = PointSet::from_rows(&[vec![0.0]], None, "t").unwrap();
        assert_eq!(select_random(&one, 1, 9).unwrap().indices, vec![0]);
        assert!(select_random(&one, 2, 9).is_err());
    }

    #[test]
    fn fps_hand_trace() {
        let ps = pool_1d(&[0.0, 4.0, 10.0]);
        let sel = select_fps(&ps, 3, Some(0), 0).unwrap();
        assert_eq!(sel.indices, vec![0, 2, 1]);
    }

    #[test]
    fn fps_full_budget_zero_fill() {
        let ps = crate::data::synth_uniform(12, 2, 5).unwrap();
        let sel = select_fps(&ps, 12, None, 5).unwrap();
        assert_eq!(sel.trace.last().unwrap().wfd, 0.0);
    }

    #[test]
    fn fps_duplicate_tie_takes_lower_index() {
        // two duplicate farthest points at x=10
        let ps = pool_1d(&[0.0, 10.0, 10.0, 5.0]);
        let sel = select_fps(&ps, 2, Some(0), 0).unwrap();
        assert_eq!(sel.indices, vec![0, 1]);
    }

    #[test]
    fn dafps_hand_trace() {
        // pool {0,1,2,10}, k=2, u=0, start 0: picks 10 (score 20) then 2
        let ps = pool_1d(&[0.0, 1.0, 2.0, 10.0]);
        let t = build_table(&ps, 2).unwrap();
        let mut cfg = DafpsConfig::new(3, 0, 0);
        cfg.initial = vec![0];
        let sel = select_dafps(&ps, Some(&t), &cfg).unwrap();
        assert_eq!(sel.indices, vec![0, 3, 2]);
        assert_eq!(sel.trace[1].score, Some(20.0));
        assert_eq!(sel.trace[2].score, Some(4.0));
    }

    #[test]
    fn dafps_unit_weights_equals_fps() {
        for seed in [0u64, 1, 2] {
            let ps = crate::data::synth_uniform(60, 3, seed + 100).unwrap();
            let fps = select_fps(&ps, 12, None, seed).unwrap();
            let mut cfg = DafpsConfig::new(12, 0, seed);
            cfg.unit_weights = true;
            let da = select_dafps(&ps, None, &cfg).unwrap();
            assert_eq!(da.indices, fps.indices, "seed {seed}");
        }
    }

    #[test]
    fn dafps_uniform_phase_matches_fps_prefix() {
        let ps = crate::data::synth_uniform(50, 2, 8).unwrap();
        let t = build_table(&ps, 6).unwrap();
        let u = 7;
        let cfg = DafpsConfig::new(10, u, 42);
        let da = select_dafps(&ps, Some(&t), &cfg).unwrap();
        let fps = select_fps(&ps, 10, None, 42).unwrap();
        assert_eq!(&da.indices[..u], &fps.indices[..u]);
    }

    #[test]
    fn dafps_trace_wfd_nonincreasing() {
        let ps = crate::data::synth_uniform(80, 2, 4).unwrap();
        let t = build_table(&ps, 10).unwrap();
        let cfg = DafpsConfig::new(20, 0, 4);
        let sel = select_dafps(&ps, Some(&t), &cfg).unwrap();
        for w in sel.trace.windows(2) {
            assert!(w[1].wfd <= w[0].wfd + 1e-12);
        }
    }

    #[test]
    fn dafps_validations() {
        let ps = pool_1d(&[0.0, 1.0, 2.0, 10.0]);
        let t = build_table(&ps, 2).unwrap();
        let cfg = DafpsConfig::new(5, 0, 0);
        assert!(select_dafps(&ps, Some(&t), &cfg).is_err()); // b > n
        let cfg = DafpsConfig::new(3, 3, 0);
        assert!(select_dafps(&ps, Some(&t), &cfg).is_err()); // u >= b
        let mut cfg = DafpsConfig::new(3, 0, 0);
        cfg.initial = vec![1, 1];
        assert!(select_dafps(&ps, Some(&t), &cfg).is_err()); // repeated initial
        let mut cfg = DafpsConfig::new(3, 0, 0);
        cfg.initial = vec![9];
        assert!(select_dafps(&ps, Some(&t), &cfg).is_err()); // out of range
        let cfg = DafpsConfig::new(3, 0, 0);
        assert!(select_dafps(&ps, None, &cfg).is_err()); // missing table
    }

    #[test]
    fn kmedoids_singleton_is_median() {
        let ps = pool_1d(&[0.0, 1.0, 2.0]);
        let sel = select_kmedoidspp(&ps, 1, 3, 100).unwrap();
        assert_eq!(sel.indices, vec![1]);
    }

    #[test]
    fn kmedoids_full_budget_and_determinism() {
        let ps = crate::data::synth_uniform(15, 2, 2).unwrap();
        let a = select_kmedoidspp(&ps, 15, 5, 100).unwrap();
        let mut sorted = a.indices.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..15).collect::<Vec<_>>());
        let b = select_kmedoidspp(&ps, 4, 5, 100).unwrap();
        let c = select_kmedoidspp(&ps, 4, 5, 100).unwrap();
        assert_eq!(b.indices, c.indices);
    }

    #[test]
    fn facility_sqdist_first_pick_is_squared_medoid() {
        let ps = pool_1d(&[0.0, 1.0, 2.0]);
        let sel = select_facility_location(&ps, 1, FacilityVariant::Sqdist, 0).unwrap();
        assert_eq!(sel.indices, vec![1]);
    }

    /// 5x5 grid with spacing 0.25; the minimum pairwise distance is known,
    /// so exp(-1000 * d) vanishes and the near-diagonal-kernel claims are
    /// exact.
    fn grid_pool() -> PointSet {
        let mut rows = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                rows.push(vec![i as f64 * 0.25, j as f64 * 0.25]);
            }
        }
        PointSet::from_rows(&rows, None, "grid").unwrap()
    }

    #[test]
    fn facility_gauss_large_gamma_unit_gains() {
        let ps = grid_pool();
        let sel =
            select_facility_location(&ps, 5, FacilityVariant::Gauss { gamma: 1000.0 }, 0).unwrap();
        for e in &sel.trace {
            let g = e.score.unwrap();
            assert!((g - 1.0).abs() < 1e-3, "gain {g}");
        }
    }

    #[test]
    fn facility_gauss_gains_match_direct_recomputation() {
        let ps = crate::data::synth_uniform(30, 2, 9).unwrap();
        let gamma = 2.0;
        let sel = select_facility_location(&ps, 6, FacilityVariant::Gauss { gamma }, 0).unwrap();
        // recompute f(S_j) from scratch and difference
        let f_of = |s: &[usize]| -> f64 {
            (0..ps.len())
                .map(|y| {
                    s.iter()
                        .map(|&x| (-gamma * ps.dist(y, x)).exp())
                        .fold(0.0f64, f64::max)
                })
                .sum()
        };
        let mut prev = 0.0;
        for (j, e) in sel.trace.iter().enumerate() {
            let fj = f_of(&sel.indices[..=j]);
            let gain = fj - prev;
            assert!((gain - e.score.unwrap()).abs() < 1e-9, "step {j}");
            prev = fj;
        }
        // greedy gains on a monotone submodular objective are nonincreasing
        for w in sel.trace.windows(2) {
            assert!(w[1].score.unwrap() <= w[0].score.unwrap() + 1e-12);
        }
    }

    #[test]
    fn hybrid_edges() {
        let ps = crate::data::synth_uniform(20, 2, 3).unwrap();
        // u = 0: identical to the inner method alone
        let h0 = fps_prefix_then(&ps, InnerMethod::Random, 6, 0, None, 11, 100).unwrap();
        let r = select_random(&ps, 6, 11).unwrap();
        assert_eq!(h0.indices, r.indices);
        // u = b: identical to plain FPS
        let hb = fps_prefix_then(&ps, InnerMethod::Random, 6, 6, None, 11, 100).unwrap();
        let f = select_fps(&ps, 6, None, 11).unwrap();
        assert_eq!(hb.indices, f.indices);
    }

    #[test]
    fn hybrid_random_draws_from_complement() {
        let ps = crate::data::synth_uniform(6, 2, 3).unwrap();
        let h = fps_prefix_then(&ps, InnerMethod::Random, 4, 2, None, 5, 100).unwrap();
        let f = select_fps(&ps, 2, None, 5).unwrap();
        assert_eq!(&h.indices[..2], &f.indices[..]);
        let mut all = h.indices.clone();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 4, "indices must stay distinct");
    }

    #[test]
    fn hybrid_facility_and_kmedoids_keep_prefix() {
        let ps = crate::data::synth_uniform(30, 2, 13).unwrap();
        for inner in [
            InnerMethod::FacilitySqdist,
            InnerMethod::FacilityGauss,
            InnerMethod::Kmedoidspp,
        ] {
            let h = fps_prefix_then(&ps, inner, 8, 3, Some(5.0), 17, 100).unwrap();
            let f = select_fps(&ps, 3, None, 17).unwrap();
            assert_eq!(&h.indices[..3], &f.indices[..], "{inner:?}");
            let mut all = h.indices.clone();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), 8, "{inner:?}");
        }
    }

    #[test]
    fn tune_gamma_shapes_and_monotonicity() {
        let ps = grid_pool();
        let grid = [1000.0, 10.0, 5.0, 1.0, 0.1, 0.01];
        let curves = tune_gamma(&ps, 8, &grid, 0).unwrap();
        assert_eq!(curves.len(), 6);
        for c in &curves {
            assert_eq!(c.gains.len(), 8);
            for g in &c.gains {
                assert!(*g >= 0.0);
            }
            // greedy steps (after the forced start) are nonincreasing
            for w in c.gains[1..].windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
        // gamma = 1000 on unit-scale data: every step gains about 1
        for g in &curves[0].gains[1..] {
            assert!((g - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn selection_json_round_trip() {
        let ps = pool_1d(&[0.0, 1.0, 2.0, 10.0]);
        let t = build_table(&ps, 2).unwrap();
        let cfg = DafpsConfig::new(3, 1, 9);
        let sel = select_dafps(&ps, Some(&t), &cfg).unwrap();
        let text = sel.to_json().unwrap();
        let back = Selection::from_json(&text).unwrap();
        assert_eq!(back, sel);
    }

    #[test]
    fn all_selectors_distinct_and_deterministic() {
        let ps = crate::data::synth_uniform(25, 2, 30).unwrap();
        let t = build_table(&ps, 5).unwrap();
        let runs: Vec<Vec<usize>> = vec![
            select_random(&ps, 8, 2).unwrap().indices,
            select_fps(&ps, 8, None, 2).unwrap().indices,
            select_dafps(&ps, Some(&t), &DafpsConfig::new(8, 2, 2))
                .unwrap()
                .indices,
            select_kmedoidspp(&ps, 8, 2, 100).unwrap().indices,
            select_facility_location(&ps, 8, FacilityVariant::Sqdist, 2)
                .unwrap()
                .indices,
            select_facility_location(&ps, 8, FacilityVariant::Gauss { gamma: 3.0 }, 2)
                .unwrap()
                .indices,
        ];
        for idx in &runs {
            assert_eq!(idx.len(), 8);
            let mut s = idx.clone();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 8);
        }
        let again = select_dafps(&ps, Some(&t), &DafpsConfig::new(8, 2, 2)).unwrap();
        assert_eq!(again.indices, runs[2]);
    }

    #[test]
    fn seq_argmax_matches_parallel() {
        let scores = [0.5, 2.0, 2.0, -1.0];
        let sel = [false, false, false, false];
        assert_eq!(argmax_unselected(&scores, &sel), 1);
        assert_eq!(argmax_unselected_seq(&scores, &sel), 1);
        let sel2 = [false, true, false, false];
        assert_eq!(argmax_unselected(&scores, &sel2), 2);
        assert_eq!(argmax_unselected_seq(&scores, &sel2), 2);
    }
}
