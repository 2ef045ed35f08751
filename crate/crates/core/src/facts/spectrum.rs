//! Eigenvalue spectrum, Marchenko–Pastur bulk and the Perron–Frobenius
//! property of the dominant eigenvector.

use std::f64::consts::PI;

use crate::error::{CorrError, Result};
use crate::linalg;
use crate::matrix::CorrelationMatrix;

/// Marchenko–Pastur law with aspect ratio `q = n / T` and variance
/// `sigma2`; bulk edges `(1 ∓ √q)² sigma2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchenkoPasturParams {
    pub q: f64,
    pub sigma2: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

impl MarchenkoPasturParams {
    pub fn new(q: f64, sigma2: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite() && sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(CorrError::Config(format!(
                "Marchenko-Pastur needs q > 0 and sigma2 > 0, got q={q}, sigma2={sigma2}"
            )));
        }
        let r = q.sqrt();
        Ok(MarchenkoPasturParams {
            q,
            sigma2,
            lambda_minus: (1.0 - r).powi(2) * sigma2,
            lambda_plus: (1.0 + r).powi(2) * sigma2,
        })
    }

    /// Bulk for `n` assets observed over `t` days. The bulk variance is
    /// `1 - λ₁/n`: the share of total variance not carried by the market
    /// mode.
    pub fn for_correlation(n: usize, t: usize, lambda1: f64) -> Result<Self> {
        let sigma2 = (1.0 - lambda1 / n as f64).max(f64::MIN_POSITIVE);
        Self::new(n as f64 / t as f64, sigma2)
    }
}

/// Continuous part of the Marchenko–Pastur density; zero outside the bulk.
pub fn marchenko_pastur_density(p: &MarchenkoPasturParams, lambda: f64) -> f64 {
    if lambda <= p.lambda_minus || lambda >= p.lambda_plus || lambda <= 0.0 {
        return 0.0;
    }
    ((p.lambda_plus - lambda) * (lambda - p.lambda_minus)).sqrt()
        / (2.0 * PI * p.q * p.sigma2 * lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvector of the largest eigenvalue, signed so its entries
    /// sum to a non-negative value.
    pub first_eigenvector: Vec<f64>,
    pub lambda1_share: f64,
    pub bulk: MarchenkoPasturParams,
    /// Eigenvalues above the bulk's upper edge.
    pub outlier_count: usize,
}

impl SpectrumSummary {
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn trace_error(&self) -> f64 {
        (self.eigenvalues.iter().sum::<f64>() - self.eigenvalues.len() as f64).abs()
    }
}

/// Spectrum of `m` when estimated from `n_obs` observations (which fixes
/// the Marchenko–Pastur aspect ratio used to count outliers).
pub fn eigen_spectrum(m: &CorrelationMatrix, n_obs: usize) -> Result<SpectrumSummary> {
    let n = m.n();
    let (vals, vecs) = linalg::sym_eigen_desc(m.values());
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(CorrError::Numerical("eigensolver produced non-finite values".into()));
    }
    let mut first: Vec<f64> = vecs.column(0).iter().copied().collect();
    let norm = first.iter().map(|x| x * x).sum::<f64>().sqrt();
    first.iter_mut().for_each(|x| *x /= norm);
    if first.iter().sum::<f64>() < 0.0 {
        first.iter_mut().for_each(|x| *x = -*x);
    }
    let eigenvalues: Vec<f64> = vals.iter().copied().collect();
    let bulk = MarchenkoPasturParams::for_correlation(n, n_obs.max(1), eigenvalues[0])?;
    let outlier_count = eigenvalues.iter().filter(|&&l| l > bulk.lambda_plus).count();
    Ok(SpectrumSummary {
        lambda1_share: eigenvalues[0] / n as f64,
        eigenvalues,
        first_eigenvector: first,
        bulk,
        outlier_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerronFrobenius {
    /// Every entry of the sign-normalised dominant eigenvector is > 0.
    pub holds: bool,
    pub min_entry: f64,
    /// `λ₁ - λ₂ < 1e-10`: the dominant eigenvector is not well defined.
    pub degenerate: bool,
}

pub fn perron_frobenius_check(m: &CorrelationMatrix) -> PerronFrobenius {
    let (vals, vecs) = linalg::sym_eigen_desc(m.values());
    let mut v: Vec<f64> = vecs.column(0).iter().copied().collect();
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let min_entry = v.iter().copied().fold(f64::INFINITY, f64::min);
    let degenerate = vals.len() > 1 && vals[0] - vals[1] < 1e-10;
    PerronFrobenius {
        holds: min_entry > 0.0,
        min_entry,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn equicorrelation_spectrum() {
        let m = CorrelationMatrix::equicorrelation(10, 0.36).unwrap();
        let s = eigen_spectrum(&m, 252).unwrap();
        assert!((s.lambda1() - 4.24).abs() < 1e-12);
        assert!(s.eigenvalues[1..].iter().all(|l| (l - 0.64).abs() < 1e-12));
        assert!(s.trace_error() < 1e-8);
        assert!((s.lambda1_share - 0.424).abs() < 1e-12);
        let id = eigen_spectrum(&CorrelationMatrix::identity(5), 252).unwrap();
        assert!(id.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-14));
    }

    #[test]
    fn bulk_edges() {
        let p = MarchenkoPasturParams::new(100.0 / 252.0, 1.0).unwrap();
        assert!((p.lambda_plus - 2.6568).abs() < 1e-3, "{}", p.lambda_plus);
        assert!((p.lambda_minus - 0.1369).abs() < 1e-3, "{}", p.lambda_minus);
        assert_eq!(marchenko_pastur_density(&p, 3.0), 0.0);
        assert_eq!(marchenko_pastur_density(&p, 0.1), 0.0);
        assert!(MarchenkoPasturParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn perron_frobenius_examples() {
        let e = CorrelationMatrix::equicorrelation(6, 0.3).unwrap();
        let pf = perron_frobenius_check(&e);
        assert!(pf.holds && !pf.degenerate);
        assert!((pf.min_entry - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        let s = eigen_spectrum(&e, 252).unwrap();
        assert!(s.first_eigenvector.iter().all(|x| (x - 1.0 / 6f64.sqrt()).abs() < 1e-12));

        let block = CorrelationMatrix::from_matrix(
            DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.0, 0.9, 1.0, 0.0, 0.0, 0.0, 1.0]),
            Default::default(),
        )
        .unwrap();
        let pf = perron_frobenius_check(&block);
        assert!(!pf.holds);
        assert!(pf.min_entry.abs() < 1e-12);
    }

    #[test]
    fn identity_is_degenerate() {
        assert!(perron_frobenius_check(&CorrelationMatrix::identity(4)).degenerate);
    }
}
