//! Power-law exponent of a degree distribution by log-log regression of
//! the complementary CDF.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawOptions {
    /// Smallest degree included in the fit.
    pub min_degree: usize,
    /// A degree enters the fit only if at least this many samples are at
    /// or above it; the sparse extreme tail is too noisy to regress on.
    pub min_tail_count: usize,
}

impl Default for PowerLawOptions {
    fn default() -> Self {
        PowerLawOptions {
            min_degree: 2,
            min_tail_count: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    /// Exponent `alpha` of `P(k) ∝ k^-alpha`; `None` when degenerate.
    pub exponent: Option<f64>,
    pub r_squared: Option<f64>,
    /// Degrees actually used, `[lo, hi]`.
    pub fit_range: Option<(usize, usize)>,
    pub points: usize,
    pub distinct_degrees: usize,
    pub degenerate: bool,
}

/// Fits `log CCDF(k)` against `log(k - 1/2)` over distinct degrees
/// `k >= min_degree`. The CCDF of a power law with exponent `alpha` has
/// slope `1 - alpha`; the half-unit shift corrects for integer degrees.
pub fn power_law_fit(degrees: &[usize], opts: &PowerLawOptions) -> PowerLawFit {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &k in degrees {
        *counts.entry(k).or_default() += 1;
    }
    let distinct_degrees = counts.len();
    let total = degrees.len() as f64;
    let mut at_or_above = degrees.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut range: Option<(usize, usize)> = None;
    for (&k, &c) in &counts {
        if k >= opts.min_degree && k >= 1 && at_or_above >= opts.min_tail_count {
            xs.push((k as f64 - 0.5).ln());
            ys.push((at_or_above as f64 / total).ln());
            range = Some(range.map_or((k, k), |(lo, _)| (lo, k)));
        }
        at_or_above -= c;
    }
    let degenerate = distinct_degrees < 3 || xs.len() < 3;
    if degenerate {
        return PowerLawFit {
            exponent: None,
            r_squared: None,
            fit_range: range,
            points: xs.len(),
            distinct_degrees,
            degenerate,
        };
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    PowerLawFit {
        exponent: Some(1.0 - slope),
        r_squared: Some(r_squared),
        fit_range: range,
        points: xs.len(),
        distinct_degrees,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    /// Inverse-CDF draws from `P(k) ∝ k^-alpha`, `k = 1..=kmax`.
    fn planted(alpha: f64, count: usize, seed: u64) -> Vec<usize> {
        let kmax = 100_000;
        let mut cdf = Vec::with_capacity(kmax);
        let mut acc = 0.0;
        for k in 1..=kmax {
            acc += (k as f64).powf(-alpha);
            cdf.push(acc);
        }
        let mut r = rng::seeded(seed, 99);
        (0..count)
            .map(|_| {
                let u = r.random::<f64>() * acc;
                cdf.partition_point(|&c| c < u) + 1
            })
            .collect()
    }

    #[test]
    fn recovers_planted_exponent() {
        for seed in 0..5 {
            let fit = power_law_fit(&planted(2.5, 10_000, seed), &PowerLawOptions::default());
            let a = fit.exponent.unwrap();
            assert!((a - 2.5).abs() <= 0.2, "seed {seed}: {a}");
            assert!(fit.r_squared.unwrap() > 0.95);
        }
    }

    #[test]
    fn star_and_chain_are_degenerate() {
        let mut star = vec![1; 9];
        star.push(9);
        assert!(power_law_fit(&star, &PowerLawOptions::default()).degenerate);
        let mut chain = vec![2; 8];
        chain.extend([1, 1]);
        let fit = power_law_fit(&chain, &PowerLawOptions { min_tail_count: 1, ..Default::default() });
        assert!(fit.degenerate && fit.exponent.is_none());
    }
}
