//! k-nearest-neighbor graphs over a point set, exact or approximate.
//!
//! The approximate builder seeds candidate lists from a forest of
//! random-projection trees and then improves them with sweeps over the
//! forward and reverse neighbors of each node's neighbors. Every stage computes each node's list independently from the
//! previous stage, so the result depends only on the seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Scalar};

pub const DEFAULT_K: usize = 10;
const FOREST_SIZE: usize = 8;
const LEAF_SIZE: usize = 32;
/// Neighbor-of-neighbor sweeps stop early once no list changes.
const MAX_REFINE_SWEEPS: usize = 6;
/// `Auto` builds exact graphs up to this many points.
const AUTO_EXACT_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnnMode {
    Exact,
    Approximate,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    /// Local node index.
    pub node: usize,
    /// Euclidean distance.
    pub dist: T,
}

/// Directed kNN graph; node `i` stands for row `node_ids[i]` of the source data.
#[derive(Debug, Clone, PartialEq)]
pub struct AknnGraph<T> {
    pub k: usize,
    /// Per node, neighbors sorted by ascending distance (ties by node index).
    pub adjacency: Vec<Vec<Neighbor<T>>>,
    pub node_ids: Vec<usize>,
}

impl<T: Scalar> AknnGraph<T> {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Undirected neighbor lists (each edge once per endpoint), ascending by node.
    pub fn symmetrized(&self) -> Vec<Vec<Neighbor<T>>> {
        let mut sym: Vec<Vec<Neighbor<T>>> = self.adjacency.clone();
        for (u, list) in self.adjacency.iter().enumerate() {
            for nb in list {
                sym[nb.node].push(Neighbor { node: u, dist: nb.dist });
            }
        }
        for list in &mut sym {
            list.sort_by_key(|nb| nb.node);
            list.dedup_by_key(|nb| nb.node);
        }
        sym
    }

    /// Fraction of exact neighbors recovered, averaged over nodes.
    pub fn recall_against(&self, exact: &AknnGraph<T>) -> f64 {
        let mut hit = 0usize;
        let mut total = 0usize;
        for (mine, truth) in self.adjacency.iter().zip(&exact.adjacency) {
            total += truth.len();
            hit += truth
                .iter()
                .filter(|t| mine.iter().any(|m| m.node == t.node))
                .count();
        }
        if total == 0 {
            1.0
        } else {
            hit as f64 / total as f64
        }
    }
}

/// Degree of local node `node` after symmetrizing the directed edges.
pub fn degree_in_symmetrized<T: Scalar>(graph: &AknnGraph<T>, node: usize) -> Result<usize> {
    if node >= graph.len() {
        return Err(Error::UnknownNode(node));
    }
    let mut adjacent: Vec<usize> = graph.adjacency[node].iter().map(|nb| nb.node).collect();
    for (u, list) in graph.adjacency.iter().enumerate() {
        if list.iter().any(|nb| nb.node == node) {
            adjacent.push(u);
        }
    }
    adjacent.sort_unstable();
    adjacent.dedup();
    Ok(adjacent.len())
}

/// Builds the kNN graph of `rows` of `data`; node `i` is `rows[i]`.
pub fn build_aknn<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    k: usize,
    mode: KnnMode,
    seed: u64,
) -> Result<AknnGraph<T>> {
    let l = rows.len();
    if l < 2 {
        return Err(Error::InvalidArgument(format!("kNN graph needs at least 2 points, got {l}")));
    }
    if k == 0 || k >= l {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..{l}")));
    }
    if rows.iter().any(|&r| data.missing().row(r).iter().any(|&m| m)) {
        return Err(Error::MissingValues);
    }
    let points = PointSet {
        data: data.packed_rows(rows),
        dim: data.n_features(),
    };
    let exact = match mode {
        KnnMode::Exact => true,
        KnnMode::Approximate => k + 1 == l,
        KnnMode::Auto => l <= AUTO_EXACT_LIMIT || k + 1 == l,
    };
    let adjacency = if exact {
        exact_lists(&points, k)
    } else {
        approximate_lists(&points, k, seed)
    };
    Ok(AknnGraph {
        k,
        adjacency,
        node_ids: rows.to_vec(),
    })
}

struct PointSet<T> {
    data: Vec<T>,
    dim: usize,
}

impl<T: Scalar> PointSet<T> {
    fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn dist2(&self, a: usize, b: usize) -> T {
        sq_dist(self.point(a), self.point(b))
    }
}

/// Keeps the `k` best `(squared distance, node)` candidates, sorted.
struct TopK<T> {
    k: usize,
    items: Vec<(T, usize)>,
}

impl<T: Scalar> TopK<T> {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn worse(a: (T, usize), b: (T, usize)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
    }

    fn offer(&mut self, d2: T, node: usize) {
        if self.items.len() == self.k && !Self::worse(*self.items.last().unwrap(), (d2, node)) {
            return;
        }
        if self.items.iter().any(|&(_, n)| n == node) {
            return;
        }
        let pos = self
            .items
            .iter()
            .position(|&item| Self::worse(item, (d2, node)))
            .unwrap_or(self.items.len());
        self.items.insert(pos, (d2, node));
        self.items.truncate(self.k);
    }

    fn into_neighbors(self) -> Vec<Neighbor<T>> {
        self.items
            .into_iter()
            .map(|(d2, node)| Neighbor { node, dist: d2.sqrt() })
            .collect()
    }
}

fn exact_row<T: Scalar>(points: &PointSet<T>, u: usize, k: usize) -> Vec<Neighbor<T>> {
    let mut top = TopK::new(k);
    for v in 0..points.len() {
        if v != u {
            top.offer(points.dist2(u, v), v);
        }
    }
    top.into_neighbors()
}

fn exact_lists<T: Scalar>(points: &PointSet<T>, k: usize) -> Vec<Vec<Neighbor<T>>> {
    (0..points.len())
        .into_par_iter()
        .map(|u| exact_row(points, u, k))
        .collect()
}

/// Splits `indices` recursively at the median of a random projection.
fn rp_leaves<T: Scalar>(
    points: &PointSet<T>,
    indices: &mut [usize],
    rng: &mut ChaCha8Rng,
    leaves: &mut Vec<Vec<usize>>,
) {
    if indices.len() <= LEAF_SIZE {
        leaves.push(indices.to_vec());
        return;
    }
    let direction: Vec<f64> = (0..points.dim).map(|_| rng.sample(StandardNormal)).collect();
    let project = |i: usize| -> f64 {
        points
            .point(i)
            .iter()
            .zip(&direction)
            .map(|(&x, &d)| x.as_f64() * d)
            .sum()
    };
    let mut keyed: Vec<(f64, usize)> = indices.iter().map(|&i| (project(i), i)).collect();
    let mid = keyed.len() / 2;
    keyed.select_nth_unstable_by(mid, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (slot, (_, i)) in indices.iter_mut().zip(keyed) {
        *slot = i;
    }
    let (left, right) = indices.split_at_mut(mid);
    rp_leaves(points, left, rng, leaves);
    rp_leaves(points, right, rng, leaves);
}

fn approximate_lists<T: Scalar>(points: &PointSet<T>, k: usize, seed: u64) -> Vec<Vec<Neighbor<T>>> {
    let l = points.len();
    // leaf memberships of every node, across the forest
    let mut member_of: Vec<Vec<u32>> = vec![Vec::with_capacity(FOREST_SIZE); l];
    let mut leaves: Vec<Vec<usize>> = Vec::new();
    for tree in 0..FOREST_SIZE {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(tree as u64 * 0x9E37_79B9));
        let mut indices: Vec<usize> = (0..l).collect();
        indices.shuffle(&mut rng);
        let first = leaves.len();
        rp_leaves(points, &mut indices, &mut rng, &mut leaves);
        for (leaf_id, leaf) in leaves.iter().enumerate().skip(first) {
            for &i in leaf {
                member_of[i].push(leaf_id as u32);
            }
        }
    }

    let mut lists: Vec<Vec<(T, usize)>> = (0..l)
        .into_par_iter()
        .map(|u| {
            let mut top = TopK::new(k);
            for &leaf in &member_of[u] {
                for &v in &leaves[leaf as usize] {
                    if v != u {
                        top.offer(points.dist2(u, v), v);
                    }
                }
            }
            top.items
        })
        .collect();

    for _ in 0..MAX_REFINE_SWEEPS {
        // forward and reverse neighbors, in node order
        let mut around: Vec<Vec<usize>> = lists.iter().map(|items| items.iter().map(|&(_, v)| v).collect()).collect();
        for (u, items) in lists.iter().enumerate() {
            for &(_, v) in items {
                around[v].push(u);
            }
        }
        for list in &mut around {
            list.sort_unstable();
            list.dedup();
        }
        let next: Vec<Vec<(T, usize)>> = (0..l)
            .into_par_iter()
            .map(|u| {
                let mut top = TopK::new(k);
                for &(d2, v) in &lists[u] {
                    top.offer(d2, v);
                }
                for &v in &around[u] {
                    if v != u {
                        top.offer(points.dist2(u, v), v);
                    }
                    for &w in &around[v] {
                        if w != u {
                            top.offer(points.dist2(u, w), w);
                        }
                    }
                }
                top.items
            })
            .collect();
        let settled = next == lists;
        lists = next;
        if settled {
            break;
        }
    }

    lists
        .into_par_iter()
        .enumerate()
        .map(|(u, items)| {
            if items.len() < k {
                exact_row(points, u, k)
            } else {
                TopK { k, items }.into_neighbors()
            }
        })
        .collect()
}
