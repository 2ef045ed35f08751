//! Pooled pairwise statistics, histograms and two-sample tests.

use crate::error::{CorrError, Result};
use crate::linalg::order_free_sum;
use crate::matrix::CorrelationMatrix;

pub const PAIRWISE_BINS: usize = 50;

/// Equal-width histogram on `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize, values: &[f64]) -> Self {
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            if v < lo || v > hi || !v.is_finite() {
                continue;
            }
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_edges(&self, b: usize) -> (f64, f64) {
        let w = self.bin_width();
        (self.lo + b as f64 * w, self.lo + (b + 1) as f64 * w)
    }

    /// Normalised so the histogram integrates to one.
    pub fn density(&self) -> Vec<f64> {
        let norm = self.total() as f64 * self.bin_width();
        self.counts
            .iter()
            .map(|&c| if norm > 0.0 { c as f64 / norm } else { 0.0 })
            .collect()
    }

    /// `log10` of the density; `None` for empty bins.
    pub fn log_density(&self) -> Vec<Option<f64>> {
        self.density()
            .into_iter()
            .map(|d| (d > 0.0).then(|| d.log10()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
    pub histogram: Histogram,
}

impl PairwiseStats {
    pub fn log_histogram(&self) -> Vec<Option<f64>> {
        self.histogram.log_density()
    }
}

/// Mean, spread and histogram of all off-diagonal coefficients pooled over
/// the set.
pub fn pairwise_stats(set: &[CorrelationMatrix]) -> Result<PairwiseStats> {
    if set.is_empty() {
        return Err(CorrError::Structure("pairwise statistics of an empty set".into()));
    }
    let mut values: Vec<f64> = set.iter().flat_map(|m| m.off_diagonal()).collect();
    if values.is_empty() {
        return Err(CorrError::Structure("matrices have no off-diagonal entries".into()));
    }
    let count = values.len();
    let histogram = Histogram::new(-1.0, 1.0, PAIRWISE_BINS, &values);
    let mean = order_free_sum(&mut values) / count as f64;
    let mut sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let std = (order_free_sum(&mut sq) / count as f64).sqrt();
    Ok(PairwiseStats {
        mean,
        std,
        count,
        histogram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    if a.is_empty() || b.is_empty() {
        return KsResult {
            statistic: 1.0,
            p_value: 0.0,
        };
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    }
}

/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson correlation; `None` if either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
