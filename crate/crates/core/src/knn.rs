//! Exact k-nearest-neighbor tables over the pool.
//!
//! The table stores, for each pool point, its `k` nearest pool points
//! (itself included, pinned first) with true Euclidean distances. Distance
//! comparisons happen on squared values; square roots are taken once when
//! the table is materialized. A kd-tree answers queries for d <= 20; higher
//! dimensions fall back to a brute-force scan. Both paths use the same
//! squared-distance kernel and the same (distance, index) tie order, so
//! their tables are identical bit for bit.

use rayon::prelude::*;

use crate::data::{sq_dist, PointSet};
use crate::error::{Error, Result};

/// Dimension above which kd-tree pruning stops paying for itself.
const KDTREE_MAX_DIM: usize = 20;
const LEAF_SIZE: usize = 16;

/// Per-point sorted neighbor lists; houses rho_k.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    n: usize,
    k: usize,
    ids: Vec<u32>,
    dists: Vec<f64>,
}

impl NeighborTable {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Neighbor ids of point `i`, nearest first; `row_ids(i)[0] == i`.
    #[inline]
    pub fn row_ids(&self, i: usize) -> &[u32] {
        &self.ids[i * self.k..(i + 1) * self.k]
    }

    /// Nondecreasing Euclidean distances matching [`Self::row_ids`].
    #[inline]
    pub fn row_dists(&self, i: usize) -> &[f64] {
        &self.dists[i * self.k..(i + 1) * self.k]
    }

    /// Distance from point `i` to its k-th nearest pool neighbor — the
    /// smallest radius whose closed ball around `x_i` holds at least `k`
    /// pool points (the point itself counts).
    #[inline]
    pub fn rho_k(&self, i: usize) -> f64 {
        self.dists[i * self.k + self.k - 1]
    }

    /// Number of stored neighbors of `i` within closed radius `r`.
    /// Exact for `r <= rho_k(i)` up to ties at exactly `rho_k` that fell
    /// outside the table; those are dropped, which keeps the count <= k.
    #[inline]
    pub fn count_within(&self, i: usize, r: f64) -> usize {
        self.row_dists(i).partition_point(|&d| d <= r)
    }
}

/// Builds the exact kNN table for every pool point.
///
/// Requires `2 <= k < n`. Ties beyond the self entry break by ascending
/// pool index; the query point itself is always the first entry.
pub fn build_table(ps: &PointSet, k: usize) -> Result<NeighborTable> {
    let n = ps.len();
    if k < 2 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "neighborhood size must satisfy 2 <= k < n, got k={k}, n={n}"
        )));
    }
    if ps.dim() <= KDTREE_MAX_DIM {
        let tree = KdTree::build(ps);
        fill_table(ps, k, |i, best| tree.knn_into(ps, i, best))
    } else {
        build_table_bruteforce(ps, k)
    }
}

/// Brute-force O(n^2) construction; reference path for any dimension and
/// the production path for d > 20. Queries are processed in small blocks
/// so one streaming pass over the pool serves several rows; per-query
/// candidate order stays ascending in j, so results match the row-at-a-time
/// scan exactly.
pub fn build_table_bruteforce(ps: &PointSet, k: usize) -> Result<NeighborTable> {
    let n = ps.len();
    if k < 2 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "neighborhood size must satisfy 2 <= k < n, got k={k}, n={n}"
        )));
    }
    const BLOCK: usize = 16;
    let mut ids = vec![0u32; n * k];
    let mut dists = vec![0f64; n * k];
    ids.par_chunks_mut(k * BLOCK)
        .zip(dists.par_chunks_mut(k * BLOCK))
        .enumerate()
        .for_each(|(blk, (id_chunk, dist_chunk))| {
            let start = blk * BLOCK;
            let end = (start + BLOCK).min(n);
            let mut heaps: Vec<KBest> = (start..end).map(|_| KBest::new(k - 1)).collect();
            for j in 0..n {
                let pj = ps.point(j);
                for (q, heap) in heaps.iter_mut().enumerate() {
                    let i = start + q;
                    if j != i {
                        heap.offer(sq_dist(ps.point(i), pj), j as u32);
                    }
                }
            }
            for (q, heap) in heaps.into_iter().enumerate() {
                let id_row = &mut id_chunk[q * k..(q + 1) * k];
                let dist_row = &mut dist_chunk[q * k..(q + 1) * k];
                id_row[0] = (start + q) as u32;
                dist_row[0] = 0.0;
                for (slot, (sq, id)) in heap.into_sorted().into_iter().enumerate() {
                    id_row[slot + 1] = id;
                    dist_row[slot + 1] = sq.sqrt();
                }
            }
        });
    Ok(NeighborTable { n, k, ids, dists })
}

fn fill_table<F>(ps: &PointSet, k: usize, search: F) -> Result<NeighborTable>
where
    F: Fn(usize, &mut KBest) + Sync,
{
    let n = ps.len();
    let mut ids = vec![0u32; n * k];
    let mut dists = vec![0f64; n * k];

    ids.par_chunks_mut(k)
        .zip(dists.par_chunks_mut(k))
        .enumerate()
        .for_each(|(i, (id_row, dist_row))| {
            let mut best = KBest::new(k - 1);
            search(i, &mut best);
            id_row[0] = i as u32;
            dist_row[0] = 0.0;
            for (slot, (sq, id)) in best.into_sorted().into_iter().enumerate() {
                id_row[slot + 1] = id;
                dist_row[slot + 1] = sq.sqrt();
            }
        });

    Ok(NeighborTable { n, k, ids, dists })
}

/// Bounded worst-first candidate list ordered by (squared distance, index).
struct KBest {
    cap: usize,
    heap: Vec<(f64, u32)>, // binary max-heap under (sq, id) lexicographic order
}

impl KBest {
    fn new(cap: usize) -> Self {
        KBest {
            cap,
            heap: Vec::with_capacity(cap),
        }
    }

    #[inline]
    fn worse(a: (f64, u32), b: (f64, u32)) -> bool {
        // (sq, id) total order; NaNs are excluded by the PointSet invariant
        a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
    }

    /// Squared distance at which a candidate can no longer qualify.
    #[inline]
    fn prune_bound(&self) -> f64 {
        if self.heap.len() < self.cap {
            f64::INFINITY
        } else {
            self.heap[0].0
        }
    }

    #[inline]
    fn offer(&mut self, sq: f64, id: u32) {
        let cand = (sq, id);
        if self.heap.len() < self.cap {
            self.heap.push(cand);
            let mut c = self.heap.len() - 1;
            while c > 0 {
                let p = (c - 1) / 2;
                if Self::worse(self.heap[c], self.heap[p]) {
                    self.heap.swap(c, p);
                    c = p;
                } else {
                    break;
                }
            }
        } else if Self::worse(self.heap[0], cand) {
            self.heap[0] = cand;
            let mut p = 0;
            loop {
                let (l, r) = (2 * p + 1, 2 * p + 2);
                let mut top = p;
                if l < self.heap.len() && Self::worse(self.heap[l], self.heap[top]) {
                    top = l;
                }
                if r < self.heap.len() && Self::worse(self.heap[r], self.heap[top]) {
                    top = r;
                }
                if top == p {
                    break;
                }
                self.heap.swap(p, top);
                p = top;
            }
        }
    }

    fn into_sorted(mut self) -> Vec<(f64, u32)> {
        self.heap
            .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        self.heap
    }
}

/// Static kd-tree with bucket leaves and cyclic split axes.
///
/// Pruning uses only the single-axis split-plane distance with a strict
/// comparison, which never discards a candidate that could still enter the
/// result under (distance, index) order — including exact distance ties.
struct KdTree {
    nodes: Vec<Node>,
    /// Pool indices, permuted so each leaf owns a contiguous range.
    order: Vec<u32>,
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

impl KdTree {
    fn build(ps: &PointSet) -> Self {
        let mut order: Vec<u32> = (0..ps.len() as u32).collect();
        let mut nodes = Vec::new();
        let n = ps.len();
        Self::build_rec(ps, &mut order, &mut nodes, 0, n, 0);
        KdTree { nodes, order }
    }

    fn build_rec(
        ps: &PointSet,
        order: &mut [u32],
        nodes: &mut Vec<Node>,
        start: usize,
        end: usize,
        depth: usize,
    ) -> usize {
        let me = nodes.len();
        if end - start <= LEAF_SIZE {
            nodes.push(Node::Leaf { start, end });
            return me;
        }
        nodes.push(Node::Leaf { start, end }); // placeholder
        let axis = depth % ps.dim();
        let slice = &mut order[start..end];
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            let (ca, cb) = (ps.point(a as usize)[axis], ps.point(b as usize)[axis]);
            ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
        });
        let value = ps.point(slice[mid] as usize)[axis];
        let left = Self::build_rec(ps, order, nodes, start, start + mid, depth + 1);
        let right = Self::build_rec(ps, order, nodes, start + mid, end, depth + 1);
        nodes[me] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        me
    }

    /// Collects the `best.cap` nearest neighbors of pool point `qi`,
    /// excluding `qi` itself.
    fn knn_into(&self, ps: &PointSet, qi: usize, best: &mut KBest) {
        self.search(ps, ps.point(qi), qi as u32, 0, best);
    }

    fn search(&self, ps: &PointSet, q: &[f64], skip: u32, node: usize, best: &mut KBest) {
        match &self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.order[*start..*end] {
                    if id != skip {
                        best.offer(sq_dist(q, ps.point(id as usize)), id);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - *value;
                let (near, far) = if diff < 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(ps, q, skip, near, best);
                // Strict inequality: a far-side point at exactly the bound
                // can still win a tie on index.
                if diff * diff <= best.prune_bound() {
                    self.search(ps, q, skip, far, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PointSet;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn pool_1d(xs: &[f64]) -> PointSet {
        PointSet::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(), None, "t").unwrap()
    }

    #[test]
    fn line_pool_neighbors() {
        let ps = pool_1d(&[0.0, 1.0, 3.0]);
        let t = build_table(&ps, 2).unwrap();
        assert_eq!(t.row_ids(0), &[0, 1]);
        assert_eq!(t.row_dists(0), &[0.0, 1.0]);
        assert_eq!(t.row_ids(2), &[2, 1]);
        assert_eq!(t.row_dists(2), &[0.0, 2.0]);
    }

    #[test]
    fn duplicates_at_distance_zero() {
        let ps = pool_1d(&[0.0, 0.0, 5.0]);
        let t = build_table(&ps, 2).unwrap();
        assert_eq!(t.row_ids(0), &[0, 1]);
        assert_eq!(t.row_dists(0), &[0.0, 0.0]);
        // self stays first even though index 0 ties at distance zero
        assert_eq!(t.row_ids(1), &[1, 0]);
        assert_eq!(t.rho_k(1), 0.0);
    }

    #[test]
    fn self_column_is_zero() {
        let ps = crate::data::synth_uniform(40, 3, 7).unwrap();
        let t = build_table(&ps, 2).unwrap();
        for i in 0..ps.len() {
            assert_eq!(t.row_ids(i)[0], i as u32);
            assert_eq!(t.row_dists(i)[0], 0.0);
        }
    }

    #[test]
    fn rho_k_line_pool() {
        let ps = pool_1d(&[0.0, 1.0, 2.0]);
        let t = build_table(&ps, 2).unwrap();
        assert_eq!(t.rho_k(0), 1.0);
        let ps4 = pool_1d(&[0.0, 1.0, 2.0, 9.0]);
        let t3 = build_table(&ps4, 3).unwrap();
        assert_eq!(t3.rho_k(0), 2.0);
    }

    #[test]
    fn parameter_bounds() {
        let ps = pool_1d(&[0.0, 1.0, 2.0]);
        assert!(build_table(&ps, 1).is_err());
        assert!(build_table(&ps, 3).is_err());
        assert!(build_table(&ps, 2).is_ok());
    }

    #[test]
    fn ball_count_consistency() {
        let ps = crate::data::synth_uniform(120, 2, 11).unwrap();
        let k = 7;
        let t = build_table(&ps, k).unwrap();
        for i in 0..ps.len() {
            let rho = t.rho_k(i);
            let count = (0..ps.len()).filter(|&j| ps.dist(i, j) <= rho).count();
            assert!(count >= k, "point {i}: {count} < {k}");
        }
    }

    #[test]
    fn rows_are_nondecreasing() {
        let ps = crate::data::synth_uniform(200, 4, 3).unwrap();
        let t = build_table(&ps, 9).unwrap();
        for i in 0..ps.len() {
            let row = t.row_dists(i);
            for w in row.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn kdtree_matches_bruteforce_with_duplicates() {
        // grid with repeated coordinates exercises tie handling
        let mut rng = StdRng::seed_from_u64(42);
        let rows: Vec<Vec<f64>> = (0..150)
            .map(|_| {
                vec![
                    rng.gen_range(0..5) as f64,
                    rng.gen_range(0..5) as f64,
                    rng.gen_range(0..3) as f64,
                ]
            })
            .collect();
        let ps = PointSet::from_rows(&rows, None, "t").unwrap();
        for k in [2, 5, 20] {
            let a = build_table(&ps, k).unwrap();
            let b = build_table_bruteforce(&ps, k).unwrap();
            assert_eq!(a.ids, b.ids, "k={k}");
            assert_eq!(a.dists, b.dists, "k={k}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn kdtree_matches_bruteforce(seed in 0u64..1000, n in 10usize..80, d in 1usize..5) {
            let ps = crate::data::synth_uniform(n, d, seed).unwrap();
            let k = 2 + (seed as usize % (n - 2));
            let a = build_table(&ps, k).unwrap();
            let b = build_table_bruteforce(&ps, k).unwrap();
            prop_assert_eq!(a.ids, b.ids);
            prop_assert_eq!(a.dists, b.dists);
        }
    }
}
