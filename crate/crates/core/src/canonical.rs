//! Canonical ordering of correlation matrices.
//!
//! Assets are clustered by single linkage on `d = sqrt(2(1 - rho))`, and the
//! dendrogram's leaf order (with a value-based rule for which child comes
//! first) gives the permutation. Every decision depends only on matrix
//! values, never on input positions, so two orderings of the same assets
//! map to the same representative whenever the values are free of ties.
//! Sums are taken over sorted values to keep floating-point results
//! independent of the input order.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::linalg::order_free_sum;
use crate::matrix::{CorrelationMatrix, Permutation};

/// `d_ij = sqrt(2 (1 - rho_ij))`, zero on the diagonal, entries in `[0, 2]`.
pub fn correlation_distance(m: &CorrelationMatrix) -> DMatrix<f64> {
    let n = m.n();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (2.0 * (1.0 - m.get(i, j))).max(0.0).sqrt().min(2.0)
        }
    })
}

/// One agglomeration step. Leaves are nodes `0..n`; the node created by
/// merge `k` has id `n + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaf_count: usize,
    merges: Vec<Merge>,
    /// True when some equal-height merge could only be resolved by index.
    pub tie_fallback: bool,
}

impl Dendrogram {
    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Leaves under `node`, in left-to-right order.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.leaf_count {
                out.push(x);
            } else {
                let m = &self.merges[x - self.leaf_count];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out
    }

    pub fn root(&self) -> usize {
        self.leaf_count + self.merges.len() - 1
    }

    /// Height at which each pair of leaves first shares a cluster.
    pub fn cophenetic(&self) -> DMatrix<f64> {
        let n = self.leaf_count;
        let mut c = DMatrix::zeros(n, n);
        for m in &self.merges {
            let left = self.leaves(m.left);
            let right = self.leaves(m.right);
            for &a in &left {
                for &b in &right {
                    c[(a, b)] = m.height;
                    c[(b, a)] = m.height;
                }
            }
        }
        c
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Lexicographic comparison of sorted float lists, shorter-is-smaller on
/// a common prefix.
fn cmp_profiles(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Single-linkage agglomeration of a symmetric distance matrix.
///
/// Merges happen in increasing distance order. When several merges are
/// possible at the same height, the one whose members' sorted distance
/// rows (concatenated and sorted) compare lexicographically smallest goes
/// first; only if those profiles are identical does the smallest leaf index
/// decide, and `tie_fallback` is set.
pub fn single_linkage(d: &DMatrix<f64>) -> Dendrogram {
    let n = d.nrows();
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((d[(i, j)], i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let sorted_rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r: Vec<f64> = d.row(i).iter().copied().collect();
            r.sort_by(f64::total_cmp);
            r
        })
        .collect();

    let mut sets = DisjointSets::new(n);
    // Dendrogram node currently representing each disjoint-set root.
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut tie_fallback = false;

    let mut start = 0;
    while start < edges.len() && merges.len() + 1 < n {
        let height = edges[start].0;
        let mut end = start;
        while end < edges.len() && edges[end].0.total_cmp(&height) == Ordering::Equal {
            end += 1;
        }
        loop {
            let mut candidates: Vec<(usize, usize)> = Vec::new();
            for &(_, i, j) in &edges[start..end] {
                let (a, b) = (sets.find(i), sets.find(j));
                if a != b {
                    let pair = if a < b { (a, b) } else { (b, a) };
                    if !candidates.contains(&pair) {
                        candidates.push(pair);
                    }
                }
            }
            if candidates.is_empty() {
                break;
            }
            let (a, b) = if candidates.len() == 1 {
                candidates[0]
            } else {
                let profile = |&(a, b): &(usize, usize)| {
                    let mut p: Vec<f64> = members[a]
                        .iter()
                        .chain(&members[b])
                        .flat_map(|&l| sorted_rows[l].iter().copied())
                        .collect();
                    p.sort_by(f64::total_cmp);
                    p
                };
                let mut scored: Vec<(Vec<f64>, usize, (usize, usize))> = candidates
                    .iter()
                    .map(|c| {
                        let lowest = members[c.0].iter().chain(&members[c.1]).min().copied();
                        (profile(c), lowest.unwrap_or(0), *c)
                    })
                    .collect();
                scored.sort_by(|x, y| cmp_profiles(&x.0, &y.0).then(x.1.cmp(&y.1)));
                if cmp_profiles(&scored[0].0, &scored[1].0) == Ordering::Equal {
                    tie_fallback = true;
                }
                scored[0].2
            };
            let (left, right) = (node_of[a], node_of[b]);
            let mut joined = std::mem::take(&mut members[a]);
            joined.append(&mut members[b]);
            let size = joined.len();
            sets.parent[b] = a;
            members[a] = joined;
            node_of[a] = n + merges.len();
            merges.push(Merge {
                left,
                right,
                height,
                size,
            });
        }
        start = end;
    }

    Dendrogram {
        leaf_count: n,
        merges,
        tie_fallback,
    }
}

/// Leaf permutation induced by the dendrogram, plus whether some ordering
/// decision was an exact tie that could only be broken by position.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalOrder {
    pub permutation: Permutation,
    pub ambiguous: bool,
}

/// Mean correlation of a cluster's members to the full asset set.
fn cluster_score(m: &CorrelationMatrix, leaves: &[usize]) -> f64 {
    let n = m.n();
    let mut vals: Vec<f64> = leaves
        .iter()
        .flat_map(|&l| (0..n).map(move |j| (l, j)))
        .map(|(l, j)| m.get(l, j))
        .collect();
    order_free_sum(&mut vals) / vals.len() as f64
}

/// Within-cluster correlations, sorted descending.
fn internal_profile(m: &CorrelationMatrix, leaves: &[usize]) -> Vec<f64> {
    let mut out = Vec::new();
    for (k, &a) in leaves.iter().enumerate() {
        for &b in &leaves[k + 1..] {
            out.push(m.get(a, b));
        }
    }
    out.sort_by(|x, y| y.total_cmp(x));
    out
}

/// The permutation `pi_H` such that `permute(m, pi_H)` is the canonical
/// representative.
///
/// At every internal node the child whose leaves have the larger mean
/// correlation to all assets is placed first; equal means are broken by
/// comparing the children's internal correlations (sorted descending,
/// larger first). Remaining exact ties keep merge order and set
/// `ambiguous`.
pub fn hierarchical_permutation(m: &CorrelationMatrix) -> HierarchicalOrder {
    let n = m.n();
    if n == 1 {
        return HierarchicalOrder {
            permutation: Permutation::identity(1),
            ambiguous: false,
        };
    }
    let dendrogram = single_linkage(&correlation_distance(m));
    let mut ambiguous = dendrogram.tie_fallback;
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![dendrogram.root()];
    while let Some(node) = stack.pop() {
        if node < n {
            order.push(node);
            continue;
        }
        let merge = dendrogram.merges[node - n];
        let left = dendrogram.leaves(merge.left);
        let right = dendrogram.leaves(merge.right);
        let by_score = cluster_score(m, &left).total_cmp(&cluster_score(m, &right));
        let decision = match by_score {
            Ordering::Equal => {
                cmp_profiles(&internal_profile(m, &left), &internal_profile(m, &right))
            }
            o => o,
        };
        let (first, second) = match decision {
            Ordering::Less => (merge.right, merge.left),
            Ordering::Greater => (merge.left, merge.right),
            Ordering::Equal => {
                ambiguous = true;
                (merge.left, merge.right)
            }
        };
        stack.push(second);
        stack.push(first);
    }
    HierarchicalOrder {
        permutation: Permutation::new(order).expect("dendrogram leaves form a permutation"),
        ambiguous,
    }
}

/// `R_ij = C_{pi_H(i) pi_H(j)}`.
pub fn canonicalize(m: &CorrelationMatrix) -> CorrelationMatrix {
    canonicalize_with_order(m).0
}

pub fn canonicalize_with_order(m: &CorrelationMatrix) -> (CorrelationMatrix, HierarchicalOrder) {
    let order = hierarchical_permutation(m);
    let r = m
        .permute(&order.permutation)
        .expect("permutation has matching length");
    (r, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ElliptopeVector;

    fn corr(coeffs: &[f64]) -> CorrelationMatrix {
        CorrelationMatrix::from_upper_vector(&ElliptopeVector::new(coeffs.to_vec()).unwrap())
            .unwrap()
    }

    fn all_perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_perms(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn distance_examples() {
        let m = corr(&[1.0, -1.0, -1.0]);
        let d = correlation_distance(&m);
        assert_eq!(d[(0, 1)], 0.0);
        assert_eq!(d[(0, 2)], 2.0);
        let half = correlation_distance(&CorrelationMatrix::equicorrelation(2, 0.5).unwrap());
        assert!((half[(0, 1)] - 1.0).abs() < 1e-15);
        assert_eq!(half[(0, 0)], 0.0);
    }

    #[test]
    fn closest_pair_merges_first() {
        // d12 < d13 < d23
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 0.2, 0.1, 0.0, 0.3, 0.2, 0.3, 0.0]);
        let den = single_linkage(&d);
        assert_eq!(den.merges()[0].left, 0);
        assert_eq!(den.merges()[0].right, 1);
        assert_eq!(den.merges()[0].height, 0.1);
        assert_eq!(den.merges()[1].right, 2);
        assert_eq!(den.merges()[1].height, 0.2);
        assert!(!den.tie_fallback);
    }

    #[test]
    fn equicorrelation_merges_at_one_height() {
        let m = CorrelationMatrix::equicorrelation(6, 0.3).unwrap();
        let den = single_linkage(&correlation_distance(&m));
        let h = den.merges()[0].height;
        assert_eq!(den.merges().len(), 5);
        assert!(den.merges().iter().all(|x| x.height == h));
        assert!(den.tie_fallback);
    }

    #[test]
    fn identity_maps_to_identity() {
        let id = CorrelationMatrix::identity(5);
        let (r, order) = canonicalize_with_order(&id);
        assert_eq!(r, id);
        assert!(order.ambiguous);
    }

    #[test]
    fn two_by_two_representative_unique() {
        let m = CorrelationMatrix::equicorrelation(2, 0.4).unwrap();
        let swapped = m.permute(&Permutation::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(canonicalize(&m), canonicalize(&swapped));
    }

    #[test]
    fn three_asset_example_keeps_pair_adjacent() {
        // rho12 = 0.8, rho13 = 0.2, rho23 = 0.4
        let m = corr(&[0.8, 0.2, 0.4]);
        let reference = canonicalize(&m);
        for p in all_perms(3) {
            let sigma = Permutation::new(p).unwrap();
            let shuffled = m.permute(&sigma).unwrap();
            let order = hierarchical_permutation(&shuffled);
            let rep = shuffled.permute(&order.permutation).unwrap();
            assert_eq!(rep, reference);
            // the 0.8 pair sits next to each other
            let pos = |v: f64| {
                (0..2).any(|i| rep.get(i, i + 1) == v)
            };
            assert!(pos(0.8));
        }
        // Pair {1,2} merges first; its mean correlation (1+0.8+0.2 + 0.8+1+0.4)/6
        // exceeds asset 3's (0.2+0.4+1)/3, so the pair leads and asset 3 is last.
        assert_eq!(reference.get(2, 0).max(reference.get(2, 1)), 0.4);
        assert_eq!(reference.get(0, 1), 0.8);
    }

    #[test]
    fn two_blocks_stay_contiguous() {
        // blocks {0,2} and {1,3}: within 0.9, across 0.1
        let m = corr(&[0.1, 0.9, 0.1, 0.1, 0.9, 0.1]);
        let reference = canonicalize(&m);
        for p in all_perms(4) {
            let shuffled = m.permute(&Permutation::new(p).unwrap()).unwrap();
            let rep = canonicalize(&shuffled);
            assert_eq!(rep, reference);
            assert_eq!(rep.get(0, 1), 0.9);
            assert_eq!(rep.get(2, 3), 0.9);
        }
        let within = (reference.get(0, 1) + reference.get(2, 3)) / 2.0;
        let cross = (reference.get(0, 2) + reference.get(0, 3) + reference.get(1, 2) + reference.get(1, 3)) / 4.0;
        assert!(within >= cross);
    }

    /// Textbook agglomeration: keep an explicit cluster-distance matrix and
    /// update it with the single-linkage (minimum) rule.
    fn naive_single_linkage_heights(d: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let n = d.nrows();
        let mut dist = d.clone();
        let mut active: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
        let mut heights = Vec::new();
        let mut coph = DMatrix::zeros(n, n);
        for _ in 1..n {
            let mut best = (f64::INFINITY, 0, 0);
            for i in 0..n {
                for j in (i + 1)..n {
                    if active[i].is_some() && active[j].is_some() && dist[(i, j)] < best.0 {
                        best = (dist[(i, j)], i, j);
                    }
                }
            }
            let (h, a, b) = best;
            let ma = active[a].take().unwrap();
            let mb = active[b].take().unwrap();
            for &x in &ma {
                for &y in &mb {
                    coph[(x, y)] = h;
                    coph[(y, x)] = h;
                }
            }
            for k in 0..n {
                let v = dist[(a, k)].min(dist[(b, k)]);
                dist[(a, k)] = v;
                dist[(k, a)] = v;
            }
            active[a] = Some(ma.into_iter().chain(mb).collect());
            heights.push(h);
        }
        (heights, coph)
    }

    #[test]
    fn agrees_with_naive_agglomeration() {
        let samples = crate::sampling::sample_onion(&crate::sampling::SamplerConfig {
            n: 9,
            count: 50,
            seed: 5,
        })
        .unwrap();
        for m in samples {
            let d = correlation_distance(&m);
            let den = single_linkage(&d);
            let (heights, coph) = naive_single_linkage_heights(&d);
            let ours: Vec<f64> = den.merges().iter().map(|x| x.height).collect();
            assert_eq!(ours, heights);
            let c = den.cophenetic();
            assert_eq!(c, coph);
            for i in 0..9 {
                for j in 0..9 {
                    assert!(c[(i, j)] <= d[(i, j)]);
                }
            }
        }
    }
}
