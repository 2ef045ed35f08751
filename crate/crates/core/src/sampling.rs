//! Uniform sampling from the elliptope.
//!
//! [`sample_onion`] grows a correlation matrix one dimension at a time
//! (Ghosh & Henderson's onion construction in the form given by
//! Lewandowski, Kurowicka & Joe, with shape parameter 1 so the result is
//! uniform in Lebesgue measure). [`rejection_oracle`] is a slow
//! brute-force sampler for `n <= 4` used to check it.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{CorrError, Result};
use crate::matrix::{CorrelationMatrix, ElliptopeVector, Tolerances};
use crate::rng::{self, CorrRng};

/// Samples per independent random stream.
const CHUNK: usize = 1024;

/// Largest dimension the rejection sampler accepts.
pub const MAX_REJECTION_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CorrError::Config(format!("n must be >= 2, got {}", self.n)));
        }
        if self.count == 0 {
            return Err(CorrError::Config("count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Draws `cfg.count` correlation matrices uniformly from the elliptope.
pub fn sample_onion(cfg: &SamplerConfig) -> Result<Vec<CorrelationMatrix>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.count);
    let mut chunk = 0u64;
    while out.len() < cfg.count {
        let mut rng = rng::chunked(cfg.seed, rng::stream::SAMPLER, chunk);
        let take = CHUNK.min(cfg.count - out.len());
        for _ in 0..take {
            out.push(onion_one(cfg.n, &mut rng)?);
        }
        chunk += 1;
    }
    Ok(out)
}

fn onion_one(n: usize, rng: &mut CorrRng) -> Result<CorrelationMatrix> {
    loop {
        if let Some(m) = try_onion(n, rng)? {
            return Ok(m);
        }
    }
}

/// One attempt; `None` when a Cholesky factorisation hits the (measure-zero)
/// boundary of the elliptope.
fn try_onion(n: usize, rng: &mut CorrRng) -> Result<Option<CorrelationMatrix>> {
    let beta_dist = |a: f64, b: f64| {
        Beta::new(a, b).map_err(|e| CorrError::Numerical(format!("beta({a}, {b}): {e}")))
    };
    let mut beta = 1.0 + (n as f64 - 2.0) / 2.0;
    let r12 = 2.0 * beta_dist(beta, beta)?.sample(rng) - 1.0;
    let mut r = DMatrix::from_row_slice(2, 2, &[1.0, r12, r12, 1.0]);

    for k in 2..n {
        beta -= 0.5;
        let y = beta_dist(k as f64 / 2.0, beta)?.sample(rng);
        let u: DVector<f64> =
            DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(rng)));
        let norm = u.norm();
        if norm == 0.0 {
            return Ok(None);
        }
        let w = u * (y.sqrt() / norm);
        let Some(chol) = Cholesky::new(r.clone()) else {
            return Ok(None);
        };
        let z = chol.l() * w;
        let mut grown = DMatrix::identity(k + 1, k + 1);
        grown.view_mut((0, 0), (k, k)).copy_from(&r);
        for i in 0..k {
            grown[(i, k)] = z[i];
            grown[(k, i)] = z[i];
        }
        r = grown;
    }
    // Entries are |z_i| <= 1 mathematically; clamp rounding excursions.
    r.iter_mut().for_each(|x| *x = x.clamp(-1.0, 1.0));
    Ok(CorrelationMatrix::from_matrix(r, Tolerances::default()).ok())
}

/// Output of the rejection sampler, with the proposal count needed to
/// estimate the elliptope's volume fraction of the cube `[-1, 1]^{n(n-1)/2}`.
#[derive(Debug, Clone)]
pub struct RejectionSample {
    pub matrices: Vec<CorrelationMatrix>,
    pub proposals: u64,
}

impl RejectionSample {
    pub fn acceptance_rate(&self) -> f64 {
        self.matrices.len() as f64 / self.proposals as f64
    }
}

/// Proposes coefficients uniformly on the cube and keeps the PSD ones.
pub fn rejection_oracle(cfg: &SamplerConfig) -> Result<RejectionSample> {
    cfg.validate()?;
    if cfg.n > MAX_REJECTION_N {
        return Err(CorrError::UnsupportedDimension {
            n: cfg.n,
            reason: format!("rejection sampling is limited to n <= {MAX_REJECTION_N}"),
        });
    }
    let dim = cfg.n * (cfg.n - 1) / 2;
    let exact = Tolerances {
        psd_tol: 0.0,
        diag_tol: 0.0,
    };
    let mut rng = rng::seeded(cfg.seed, rng::stream::REJECTION);
    let mut matrices = Vec::with_capacity(cfg.count);
    let mut proposals = 0u64;
    while matrices.len() < cfg.count {
        proposals += 1;
        let coeffs: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let v = ElliptopeVector::new(coeffs)?;
        if let Ok(m) = CorrelationMatrix::from_upper_vector_with(&v, exact) {
            matrices.push(m);
        }
    }
    Ok(RejectionSample {
        matrices,
        proposals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::validate;

    #[test]
    fn config_is_validated() {
        assert!(sample_onion(&SamplerConfig { n: 1, count: 1, seed: 0 }).is_err());
        assert!(sample_onion(&SamplerConfig { n: 3, count: 0, seed: 0 }).is_err());
        assert!(matches!(
            rejection_oracle(&SamplerConfig { n: 5, count: 1, seed: 0 }),
            Err(CorrError::UnsupportedDimension { n: 5, .. })
        ));
    }

    #[test]
    fn onion_samples_are_valid_and_seeded() {
        let cfg = SamplerConfig { n: 6, count: 200, seed: 3 };
        let a = sample_onion(&cfg).unwrap();
        let b = sample_onion(&cfg).unwrap();
        assert_eq!(a.len(), 200);
        for (x, y) in a.iter().zip(&b) {
            assert!(x.values().iter().zip(y.values().iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
            assert!(validate(&x.to_raw(), Tolerances::default()).is_valid);
        }
    }

    #[test]
    fn two_by_two_rejection_accepts_everything() {
        let s = rejection_oracle(&SamplerConfig { n: 2, count: 500, seed: 1 }).unwrap();
        assert_eq!(s.acceptance_rate(), 1.0);
    }
}
