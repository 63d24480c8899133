//! Point-pool representation, CSV ingestion, feature normalization and the
//! synthetic two-dimensional mixture generator.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Immutable pool of `n` feature vectors in `R^d`, optionally labeled.
///
/// Points are stored row-major. The pool is immutable after construction and
/// safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<f64>,
    n: usize,
    d: usize,
    labels: Option<Vec<f64>>,
    source_id: String,
}

impl PointSet {
    /// Builds a pool from a row-major buffer, enforcing the type invariants:
    /// `n >= 1`, `d >= 1`, all entries finite, label count equal to `n`.
    pub fn new(
        points: Vec<f64>,
        n: usize,
        d: usize,
        labels: Option<Vec<f64>>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter(format!(
                "point set must have n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        if points.len() != n * d {
            return Err(Error::InvalidParameter(format!(
                "buffer holds {} values, expected n*d = {}",
                points.len(),
                n * d
            )));
        }
        if let Some(bad) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature value at row {}, column {}",
                bad / d,
                bad % d
            )));
        }
        if let Some(ref y) = labels {
            if y.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "{} labels for {} points",
                    y.len(),
                    n
                )));
            }
            if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "non-finite label at row {bad}"
                )));
            }
        }
        Ok(Self {
            points,
            n,
            d,
            labels,
            source_id: source_id.into(),
        })
    }

    /// Builds a pool from per-row vectors; every row must have equal length.
    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<f64>>, source_id: &str) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty point list".into()));
        }
        let d = rows[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            flat.extend_from_slice(r);
        }
        Self::new(flat, n, d, labels, source_id)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Feature vector of point `i`.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Squared Euclidean distance between pool points `i` and `j`.
    #[inline]
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.point(i), self.point(j))
    }

    /// Euclidean distance between pool points `i` and `j`.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.sq_dist(i, j).sqrt()
    }

    /// Replaces the labels (used by tests and data preparation).
    pub fn with_labels(mut self, labels: Option<Vec<f64>>) -> Result<Self> {
        if let Some(ref y) = labels {
            if y.len() != self.n {
                return Err(Error::InvalidParameter(format!(
                    "{} labels for {} points",
                    y.len(),
                    self.n
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Restricts the pool to the given rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut flat = Vec::with_capacity(rows.len() * self.d);
        let mut labels = self.labels.as_ref().map(|_| Vec::with_capacity(rows.len()));
        for &r in rows {
            if r >= self.n {
                return Err(Error::InvalidParameter(format!(
                    "row index {r} out of range for n={}",
                    self.n
                )));
            }
            flat.extend_from_slice(self.point(r));
            if let (Some(ls), Some(y)) = (labels.as_mut(), self.labels.as_ref()) {
                ls.push(y[r]);
            }
        }
        Self::new(flat, rows.len(), self.d, labels, self.source_id.clone())
    }
}

/// Squared Euclidean distance between two slices of equal length.
///
/// Four independent accumulators break the add-latency chain; the unroll
/// pattern is fixed, so every caller (kd-tree, brute-force scan, greedy
/// refresh, metrics) sees bit-identical values.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut a0, mut a1, mut a2, mut a3) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        let t0 = xa[0] - xb[0];
        let t1 = xa[1] - xb[1];
        let t2 = xa[2] - xb[2];
        let t3 = xa[3] - xb[3];
        a0 += t0 * t0;
        a1 += t1 * t1;
        a2 += t2 * t2;
        a3 += t3 * t3;
    }
    let mut tail = 0.0;
    for (xa, xb) in ca.remainder().iter().zip(cb.remainder()) {
        let t = xa - xb;
        tail += t * t;
    }
    (a0 + a1) + (a2 + a3) + tail
}

/// Column selector for the label when loading delimited text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Last,
}

impl FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("last") {
            Ok(LabelColumn::Last)
        } else {
            s.parse::<usize>().map(LabelColumn::Index).map_err(|_| {
                Error::InvalidParameter(format!(
                    "label column must be a column index or \"last\", got {s:?}"
                ))
            })
        }
    }
}

/// Loads a pool from comma-separated numeric text.
///
/// One point per row; optional single header row; decimal point only;
/// scientific notation accepted. Ragged rows, non-numeric cells and empty
/// files are parse errors naming the offending 1-based line.
pub fn load_points(
    path: impl AsRef<Path>,
    has_header: bool,
    label_column: Option<LabelColumn>,
) -> Result<PointSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let source_id = path.display().to_string();
    parse_points(&text, has_header, label_column, &source_id)
}

/// Same as [`load_points`] but over an in-memory string.
pub fn parse_points(
    text: &str,
    has_header: bool,
    label_column: Option<LabelColumn>,
    source_id: &str,
) -> Result<PointSet> {
    let mut width: Option<usize> = None;
    let mut cells: Vec<f64> = Vec::new();
    let mut n = 0usize;
    let mut first_data_line = 0usize;

    for (lineno0, line) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        if has_header && lineno == 1 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if first_data_line == 0 {
            first_data_line = lineno;
        }
        let mut count = 0usize;
        for cell in line.split(',') {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("cell {cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("cell {cell:?} is not finite"),
                });
            }
            cells.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("row has {count} columns, expected {w}"),
                })
            }
            _ => {}
        }
        n += 1;
    }

    let Some(w) = width else {
        return Err(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        });
    };
    if n == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }

    let label_idx = match label_column {
        None => None,
        Some(LabelColumn::Last) => Some(w - 1),
        Some(LabelColumn::Index(i)) => {
            if i >= w {
                return Err(Error::InvalidParameter(format!(
                    "label column {i} out of range for {w} columns"
                )));
            }
            Some(i)
        }
    };
    if label_idx.is_some() && w < 2 {
        return Err(Error::Parse {
            line: first_data_line,
            msg: "cannot split a label column from single-column rows".into(),
        });
    }

    match label_idx {
        None => PointSet::new(cells, n, w, None, source_id),
        Some(li) => {
            let d = w - 1;
            let mut feats = Vec::with_capacity(n * d);
            let mut labels = Vec::with_capacity(n);
            for r in 0..n {
                for c in 0..w {
                    let v = cells[r * w + c];
                    if c == li {
                        labels.push(v);
                    } else {
                        feats.push(v);
                    }
                }
            }
            PointSet::new(feats, n, d, Some(labels), source_id)
        }
    }
}

/// Writes a pool back to comma-separated text (labels, if present, become
/// the last column). Values use Rust's shortest round-trip formatting, so a
/// load -> save -> load cycle reproduces the floats bit-identically.
pub fn save_points(ps: &PointSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, points_to_csv(ps))?;
    Ok(())
}

/// CSV rendering used by [`save_points`].
pub fn points_to_csv(ps: &PointSet) -> String {
    let mut out = String::new();
    for i in 0..ps.len() {
        let row = ps.point(i);
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        if let Some(y) = ps.labels() {
            let _ = write!(out, ",{}", y[i]);
        }
        out.push('\n');
    }
    out
}

/// Affinely rescales each feature column to `[0, 1]` (min -> 0, max -> 1).
/// Constant columns map to 0. Labels are left untouched.
pub fn normalize_unit_interval(ps: &PointSet) -> PointSet {
    let (n, d) = (ps.len(), ps.dim());
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..n {
        for (c, &v) in ps.point(i).iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        for (c, &v) in ps.point(i).iter().enumerate() {
            let range = hi[c] - lo[c];
            out.push(if range > 0.0 {
                (v - lo[c]) / range
            } else {
                0.0
            });
        }
    }
    PointSet::new(
        out,
        n,
        d,
        ps.labels().map(|y| y.to_vec()),
        ps.source_id().to_string(),
    )
    .expect("normalization preserves shape and finiteness")
}

/// Mixture used by the two-dimensional illustration: a dense central
/// Gaussian cluster, a smaller lower-left cluster, and uniform background
/// points, all inside the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixtureSpec {
    pub central_count: usize,
    pub corner_count: usize,
    pub uniform_count: usize,
    pub seed: u64,
}

/// Cluster geometry for [`synth_mixture`]. The mixture is specified by
/// its counts; the widths are cosmetic choices.
pub const CENTRAL_MEAN: [f64; 2] = [0.5, 0.5];
pub const CENTRAL_SIGMA: f64 = 0.08;
pub const CORNER_MEAN: [f64; 2] = [0.15, 0.15];
pub const CORNER_SIGMA: f64 = 0.05;

impl MixtureSpec {
    pub fn total(&self) -> usize {
        self.central_count + self.corner_count + self.uniform_count
    }

    /// The 1000-point preset: 650 central, 200 corner, 150 uniform
    /// (the CLI exposes it as `--preset fig1`).
    pub fn preset_1000(seed: u64) -> Self {
        Self {
            central_count: 650,
            corner_count: 200,
            uniform_count: 150,
            seed,
        }
    }
}

/// Draws the synthetic 2-d mixture. Gaussian draws that fall outside the
/// unit square are resampled (rejection), not clamped, so the boundary
/// carries no atoms. Deterministic given the seed.
pub fn synth_mixture(spec: &MixtureSpec) -> Result<PointSet> {
    if spec.total() == 0 {
        return Err(Error::InvalidParameter(
            "mixture must contain at least one point".into(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let mut pts = Vec::with_capacity(spec.total() * 2);

    let mut push_gaussian = |rng: &mut StdRng, mean: [f64; 2], sigma: f64, count: usize| {
        let nx = Normal::new(mean[0], sigma).expect("sigma > 0");
        let ny = Normal::new(mean[1], sigma).expect("sigma > 0");
        for _ in 0..count {
            loop {
                let x = nx.sample(rng);
                let y = ny.sample(rng);
                if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
                    pts.push(x);
                    pts.push(y);
                    break;
                }
            }
        }
    };

    push_gaussian(&mut rng, CENTRAL_MEAN, CENTRAL_SIGMA, spec.central_count);
    push_gaussian(&mut rng, CORNER_MEAN, CORNER_SIGMA, spec.corner_count);
    for _ in 0..spec.uniform_count {
        pts.push(rng.gen_range(0.0..1.0));
        pts.push(rng.gen_range(0.0..1.0));
    }

    PointSet::new(
        pts,
        spec.total(),
        2,
        None,
        format!("mixture-seed{}", spec.seed),
    )
}

/// Seeded uniform pool on `[0,1]^d`, used by the timing harness and tests.
pub fn synth_uniform(n: usize, d: usize, seed: u64) -> Result<PointSet> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(
            "uniform pool needs n >= 1 and d >= 1".into(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let pts: Vec<f64> = (0..n * d).map(|_| rng.gen_range(0.0..1.0)).collect();
    PointSet::new(pts, n, d, None, format!("uniform-{n}x{d}-seed{seed}"))
}
