// SPDX-License-Identifier: Apache-2.0

//! Randomized kd-tree forest for approximate nearest-neighbor search.
//!
//! Each tree splits on a dimension drawn at random from the five dimensions of
//! highest variance at the node, at the mean value along that dimension.
//! Queries descend every tree once, then keep expanding the closest pending
//! branches across all trees (best-bin-first) until the leaf-check budget is
//! spent. Without a budget the search only stops when no pending branch can
//! beat the current result, which makes it exact.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::DESCRIPTOR_LEN;

/// Number of top-variance dimensions a split dimension is drawn from.
pub const RAND_DIM_CANDIDATES: usize = 5;

/// Forest construction and query settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForestParams {
    pub trees: usize,
    /// Maximum leaf points examined per query; `None` searches exhaustively.
    pub checks: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: 8, checks: Some(32) }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        dim: usize,
        value: f32,
        left: u32,
        right: u32,
    },
    /// Range into the tree's `order` permutation.
    Leaf {
        start: u32,
        end: u32,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Randomized kd-trees over a fixed point set. The points themselves are not
/// stored; callers pass the same slice to every query.
#[derive(Debug, Clone)]
pub struct KdForest {
    trees: Vec<Tree>,
    len: usize,
}

/// A neighbor returned by a query: point index and squared L2 distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

/// Squared L2 distance accumulated in f64.
#[inline]
pub fn dist2(a: &[f32; DESCRIPTOR_LEN], b: &[f32; DESCRIPTOR_LEN]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

impl KdForest {
    pub fn build(points: &[[f32; DESCRIPTOR_LEN]], trees: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..trees.max(1))
            .map(|_| {
                let mut order: Vec<u32> = (0..points.len() as u32).collect();
                let mut nodes = Vec::new();
                if !order.is_empty() {
                    build_node(points, &mut order, 0, &mut nodes, &mut rng);
                }
                Tree { nodes, order }
            })
            .collect();
        Self { trees, len: points.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Up to `k` approximate nearest neighbors, closest first, ties by lowest index.
    pub fn knn(
        &self,
        points: &[[f32; DESCRIPTOR_LEN]],
        query: &[f32; DESCRIPTOR_LEN],
        k: usize,
        checks: Option<usize>,
    ) -> Vec<Neighbor> {
        debug_assert_eq!(points.len(), self.len);
        let k = k.min(self.len);
        if k == 0 {
            return Vec::new();
        }
        let mut search = Search {
            points,
            query,
            k,
            results: Vec::with_capacity(k + 1),
            visited: vec![0u64; self.len.div_ceil(64)],
            checked: 0,
            pending: BinaryHeap::new(),
        };
        for (t, tree) in self.trees.iter().enumerate() {
            search.descend(tree, t, 0, 0.0);
        }
        while let Some(Branch { bound, tree, node }) = search.pending.pop() {
            if let Some(budget) = checks {
                if search.checked >= budget {
                    break;
                }
            }
            if !search.admits(bound) {
                break;
            }
            search.descend(&self.trees[tree], tree, node, bound);
        }
        search.results
    }

    /// Approximate nearest neighbor; `None` only for an empty forest.
    pub fn nearest(
        &self,
        points: &[[f32; DESCRIPTOR_LEN]],
        query: &[f32; DESCRIPTOR_LEN],
        breadth: usize,
        checks: Option<usize>,
    ) -> Option<Neighbor> {
        self.knn(points, query, breadth.max(1), checks).into_iter().next()
    }
}

fn build_node(
    points: &[[f32; DESCRIPTOR_LEN]],
    order: &mut [u32],
    offset: u32,
    nodes: &mut Vec<Node>,
    rng: &mut ChaCha8Rng,
) -> u32 {
    let id = nodes.len() as u32;
    let leaf = Node::Leaf { start: offset, end: offset + order.len() as u32 };
    if order.len() <= 1 {
        nodes.push(leaf);
        return id;
    }

    let n = order.len() as f64;
    let mut mean = [0.0f64; DESCRIPTOR_LEN];
    for &i in order.iter() {
        for (m, &v) in mean.iter_mut().zip(points[i as usize].iter()) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0f64; DESCRIPTOR_LEN];
    for &i in order.iter() {
        for ((s, &v), m) in var.iter_mut().zip(points[i as usize].iter()).zip(mean.iter()) {
            let d = f64::from(v) - m;
            *s += d * d;
        }
    }

    let mut dims: Vec<usize> = (0..DESCRIPTOR_LEN).collect();
    dims.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    if var[dims[0]] <= 0.0 {
        // All points identical.
        nodes.push(leaf);
        return id;
    }
    let candidates = dims.iter().take(RAND_DIM_CANDIDATES).filter(|&&d| var[d] > 0.0).count();
    let dim = dims[rng.random_range(0..candidates)];

    let mut split = mean[dim] as f32;
    let mut mid = partition(points, order, dim, split);
    if mid == 0 || mid == order.len() {
        // Degenerate mean split: fall back to the median along `dim`.
        order.sort_by(|&a, &b| points[a as usize][dim].total_cmp(&points[b as usize][dim]).then(a.cmp(&b)));
        mid = order.len() / 2;
        let lo = points[order[mid - 1] as usize][dim];
        let hi = points[order[mid] as usize][dim];
        split = lo + (hi - lo) / 2.0;
        // Keep every left value <= split <= every right value.
        if !(split >= lo && split <= hi) {
            split = hi;
        }
    }

    nodes.push(Node::Split { dim, value: split, left: 0, right: 0 });
    let (left_part, right_part) = order.split_at_mut(mid);
    let left = build_node(points, left_part, offset, nodes, rng);
    let right = build_node(points, right_part, offset + mid as u32, nodes, rng);
    if let Node::Split { left: l, right: r, .. } = &mut nodes[id as usize] {
        *l = left;
        *r = right;
    }
    id
}

/// Moves points with `value < split` to the front; returns their count.
fn partition(points: &[[f32; DESCRIPTOR_LEN]], order: &mut [u32], dim: usize, split: f32) -> usize {
    let mut mid = 0;
    for i in 0..order.len() {
        if points[order[i] as usize][dim] < split {
            order.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    bound: f64,
    tree: usize,
    node: u32,
}

impl PartialEq for Branch {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Branch {}
impl PartialOrd for Branch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Branch {
    /// Reversed so that `BinaryHeap` pops the smallest bound first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.tree.cmp(&self.tree)).then(other.node.cmp(&self.node))
    }
}

struct Search<'a> {
    points: &'a [[f32; DESCRIPTOR_LEN]],
    query: &'a [f32; DESCRIPTOR_LEN],
    k: usize,
    results: Vec<Neighbor>,
    visited: Vec<u64>,
    checked: usize,
    pending: BinaryHeap<Branch>,
}

impl Search<'_> {
    /// A branch whose lower bound equals the current worst distance is still
    /// explored so that equidistant lower-index points can win ties.
    fn admits(&self, bound: f64) -> bool {
        self.results.len() < self.k || bound <= self.results[self.k - 1].dist2
    }

    fn descend(&mut self, tree: &Tree, tree_id: usize, mut node: u32, bound: f64) {
        loop {
            match tree.nodes[node as usize] {
                Node::Split { dim, value, left, right } => {
                    let diff = f64::from(self.query[dim]) - f64::from(value);
                    let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                    let far_bound = bound.max(diff * diff);
                    if self.admits(far_bound) {
                        self.pending.push(Branch { bound: far_bound, tree: tree_id, node: far });
                    }
                    node = near;
                }
                Node::Leaf { start, end } => {
                    for &i in &tree.order[start as usize..end as usize] {
                        let i = i as usize;
                        let (word, bit) = (i / 64, 1u64 << (i % 64));
                        if self.visited[word] & bit != 0 {
                            continue;
                        }
                        self.visited[word] |= bit;
                        self.checked += 1;
                        self.insert(Neighbor { index: i, dist2: dist2(&self.points[i], self.query) });
                    }
                    return;
                }
            }
        }
    }

    fn insert(&mut self, n: Neighbor) {
        if self.results.len() == self.k && n.cmp_key(&self.results[self.k - 1]) != Ordering::Less {
            return;
        }
        let pos = self.results.partition_point(|r| r.cmp_key(&n) == Ordering::Less);
        self.results.insert(pos, n);
        self.results.truncate(self.k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_scan(points: &[[f32; DESCRIPTOR_LEN]], q: &[f32; DESCRIPTOR_LEN]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, q);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    fn random_points(n: usize, seed: u64) -> Vec<[f32; DESCRIPTOR_LEN]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| core::array::from_fn(|_| rng.random_range(-1.0f32..1.0))).collect()
    }

    #[test]
    fn exhaustive_search_is_exact() {
        let points = random_points(200, 1);
        let forest = KdForest::build(&points, 4, 9);
        for q in random_points(200, 2) {
            let got = forest.nearest(&points, &q, 1, None).unwrap();
            assert_eq!(got.index, linear_scan(&points, &q));
        }
    }

    #[test]
    fn duplicates_and_ties() {
        let mut points = vec![[0.0f32; DESCRIPTOR_LEN]; 6];
        points[4][0] = 1.0;
        points[5][0] = -1.0;
        let forest = KdForest::build(&points[4..], 3, 0);
        let q = [0.0f32; DESCRIPTOR_LEN];
        assert_eq!(forest.nearest(&points[4..], &q, 1, None).unwrap().index, 0);

        let forest = KdForest::build(&points, 3, 0);
        let knn = forest.knn(&points, &q, 10, None);
        assert_eq!(knn.len(), 6);
        assert_eq!(knn.iter().map(|n| n.index).collect::<Vec<_>>(), [0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn every_point_is_reachable_in_every_tree() {
        let points = random_points(97, 5);
        let forest = KdForest::build(&points, 5, 3);
        for tree in &forest.trees {
            let mut seen = tree.order.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..97).collect::<Vec<u32>>());
        }
        for (i, p) in points.iter().enumerate() {
            assert_eq!(forest.nearest(&points, p, 1, Some(1)).unwrap().index, i);
        }
    }

    #[test]
    fn knn_is_sorted() {
        let points = random_points(64, 8);
        let forest = KdForest::build(&points, 8, 1);
        let q = random_points(1, 77)[0];
        let knn = forest.knn(&points, &q, 25, None);
        assert_eq!(knn.len(), 25);
        assert!(knn.windows(2).all(|w| w[0].dist2 <= w[1].dist2));
    }
}
