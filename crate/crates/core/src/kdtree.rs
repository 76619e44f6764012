//! Exact k-nearest-neighbor search.
//!
//! Neighbors are ordered by `(distance, index)`, so equal distances resolve to the
//! smallest index and results are deterministic. There is no approximate mode.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// A kd-tree over a subset of rows of a row-major point matrix.
///
/// Indices reported by queries are the caller's row indices.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl<'a> KdTree<'a> {
    /// Builds a tree over rows `members` of `points` (row-major, `dim` columns).
    pub fn new(points: &'a [f64], dim: usize, members: Vec<usize>) -> Self {
        assert!(dim >= 1);
        let mut tree = KdTree {
            points,
            dim,
            order: members,
            nodes: Vec::new(),
            lo: vec![f64::INFINITY; dim],
            hi: vec![f64::NEG_INFINITY; dim],
        };
        for &i in &tree.order {
            for c in 0..dim {
                let v = points[i * dim + c];
                tree.lo[c] = tree.lo[c].min(v);
                tree.hi[c] = tree.hi[c].max(v);
            }
        }
        let n = tree.order.len();
        if n > 0 {
            let (lo, hi) = (tree.lo.clone(), tree.hi.clone());
            tree.build(0, n, lo, hi);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize, lo: Vec<f64>, hi: Vec<f64>) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = (0..self.dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        let (points, d) = (self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * d + dim]
                .total_cmp(&points[b * d + dim])
                .then(a.cmp(&b))
        });
        let value = points[self.order[mid] * d + dim];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let mut left_hi = hi.clone();
        left_hi[dim] = value;
        let mut right_lo = lo.clone();
        right_lo[dim] = value;
        let left = self.build(start, mid, lo, left_hi);
        let right = self.build(mid, end, right_lo, hi);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// The `k` nearest members to `query`, sorted by `(distance, index)`, skipping `exclude`.
    pub fn nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.is_empty() {
            let gap = vec![0.0; self.dim];
            self.search(0, query, k, exclude, &mut heap, gap, 0.0);
        }
        let mut out = heap.into_vec();
        out.sort();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        node: usize,
        query: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Neighbor>,
        mut gap: Vec<f64>,
        box_dist: f64,
    ) {
        if heap.len() == k && box_dist > heap.peek().map_or(f64::INFINITY, |n| n.dist_sq) {
            return;
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = Neighbor {
                        index: i,
                        dist_sq: dist_sq(query, self.row(i)),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, exclude, heap, gap.clone(), box_dist);
                // incremental distance from the query to the far cell
                let old = gap[dim];
                let far_dist = box_dist - old * old + diff * diff;
                gap[dim] = diff;
                self.search(far, query, k, exclude, heap, gap, far_dist);
            }
        }
    }

    /// Number of members at distance strictly less than `radius`, stopping at `limit`.
    pub fn count_within(&self, query: &[f64], radius: f64, limit: usize, exclude: Option<usize>) -> usize {
        let mut count = 0;
        if !self.is_empty() {
            self.count_node(0, query, radius * radius, limit, exclude, &mut count, 0.0, vec![0.0; self.dim]);
        }
        count.min(limit)
    }

    #[allow(clippy::too_many_arguments)]
    fn count_node(
        &self,
        node: usize,
        query: &[f64],
        r2: f64,
        limit: usize,
        exclude: Option<usize>,
        count: &mut usize,
        box_dist: f64,
        mut gap: Vec<f64>,
    ) {
        if *count >= limit || box_dist >= r2 {
            return;
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) != exclude && dist_sq(query, self.row(i)) < r2 {
                        *count += 1;
                        if *count >= limit {
                            return;
                        }
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.count_node(near, query, r2, limit, exclude, count, box_dist, gap.clone());
                let old = gap[dim];
                let far_dist = box_dist - old * old + diff * diff;
                gap[dim] = diff;
                self.count_node(far, query, r2, limit, exclude, count, far_dist, gap);
            }
        }
    }
}

/// Brute-force reference for [`KdTree::nearest`].
pub fn nearest_brute(points: &[f64], dim: usize, members: &[usize], query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = members
        .iter()
        .filter(|&&i| Some(i) != exclude)
        .map(|&i| Neighbor {
            index: i,
            dist_sq: dist_sq(query, &points[i * dim..(i + 1) * dim]),
        })
        .collect();
    all.sort();
    all.truncate(k);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = stream(4, 0);
        for dim in 1..=4 {
            let n = 500;
            let pts: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
            let members: Vec<usize> = (0..n).filter(|i| i % 3 != 0).collect();
            let tree = KdTree::new(&pts, dim, members.clone());
            for _ in 0..300 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                let k = rng.gen_range(1..8);
                let ex = Some(members[rng.gen_range(0..members.len())]);
                assert_eq!(tree.nearest(&q, k, ex), nearest_brute(&pts, dim, &members, &q, k, ex));
                let r = rng.gen::<f64>() * 0.2;
                let brute = members
                    .iter()
                    .filter(|&&i| Some(i) != ex && dist_sq(&q, &pts[i * dim..(i + 1) * dim]) < r * r)
                    .count();
                assert_eq!(tree.count_within(&q, r, usize::MAX, ex), brute);
            }
        }
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        // rows 0..40 duplicated at two locations
        let pts: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { 3.0 }).collect();
        let tree = KdTree::new(&pts, 1, (0..40).rev().collect());
        let got: Vec<usize> = tree.nearest(&[2.0], 3, None).iter().map(|n| n.index).collect();
        assert_eq!(got, vec![0, 1, 2]);
    }

    #[test]
    fn empty_tree() {
        let pts = [0.0; 4];
        let t = KdTree::new(&pts, 2, vec![]);
        assert!(t.nearest(&[0.0, 0.0], 3, None).is_empty());
        assert_eq!(t.count_within(&[0.0, 0.0], 1.0, 10, None), 0);
    }
}
