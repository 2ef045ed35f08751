//! Minimum spanning tree of the correlation-distance graph.

use crate::canonical::correlation_distance;
use crate::facts::power_law::{power_law_fit, PowerLawFit, PowerLawOptions};
use crate::matrix::CorrelationMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MstEdge {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MstSummary {
    pub edges: Vec<MstEdge>,
    pub degrees: Vec<usize>,
    /// `degree_histogram[k]` = number of nodes of degree `k`.
    pub degree_histogram: Vec<usize>,
    pub fit: PowerLawFit,
}

impl MstSummary {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.distance).sum()
    }
}

/// Kruskal's algorithm on `d = sqrt(2(1 - rho))`, edges taken in
/// `(distance, i, j)` order.
pub fn mst(m: &CorrelationMatrix) -> MstSummary {
    let n = m.n();
    let d = correlation_distance(m);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            candidates.push((d[(i, j)], i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut degrees = vec![0usize; n];
    for (dist, i, j) in candidates {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a == b {
            continue;
        }
        parent[b] = a;
        degrees[i] += 1;
        degrees[j] += 1;
        edges.push(MstEdge { i, j, distance: dist });
        if edges.len() + 1 == n {
            break;
        }
    }
    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let mut degree_histogram = vec![0usize; max_degree + 1];
    for &k in &degrees {
        degree_histogram[k] += 1;
    }
    let fit = power_law_fit(
        &degrees,
        &PowerLawOptions {
            min_tail_count: 1,
            ..Default::default()
        },
    );
    MstSummary {
        edges,
        degrees,
        degree_histogram,
        fit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ElliptopeVector;
    use crate::sampling::{sample_onion, SamplerConfig};

    #[test]
    fn three_asset_tree() {
        // rho12 = 0.9, rho13 = 0.5, rho23 = 0.1
        let m = CorrelationMatrix::from_upper_vector(
            &ElliptopeVector::new(vec![0.9, 0.5, 0.1]).unwrap(),
        )
        .unwrap();
        let t = mst(&m);
        let pairs: Vec<(usize, usize)> = t.edges.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2)]);
        assert_eq!(t.degrees, vec![2, 1, 1]);
    }

    #[test]
    fn tree_invariants() {
        for m in sample_onion(&SamplerConfig { n: 15, count: 20, seed: 8 }).unwrap() {
            let t = mst(&m);
            assert_eq!(t.edges.len(), 14);
            assert_eq!(t.degrees.iter().sum::<usize>(), 28);
            assert_eq!(t.degree_histogram.iter().sum::<usize>(), 15);
            assert!(t.degrees.iter().all(|&k| k >= 1));
        }
    }

    #[test]
    fn ties_break_lexicographically() {
        let t = mst(&CorrelationMatrix::identity(4));
        let pairs: Vec<(usize, usize)> = t.edges.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3)]);
        assert!(t.fit.exponent.is_none());
    }
}
