use crate::canonical::{correlation_distance, single_linkage};
use crate::facts::stats::pearson;
use crate::matrix::CorrelationMatrix;

/// Cophenetic correlation between correlation distances and single-linkage
/// merge heights. `None` when either has zero variance (e.g. an
/// equicorrelation matrix), where the score is undefined.
pub fn hierarchy_score(m: &CorrelationMatrix) -> Option<f64> {
    let n = m.n();
    if n < 3 {
        return None;
    }
    let d = correlation_distance(m);
    let c = single_linkage(&d).cophenetic();
    let mut xs = Vec::with_capacity(n * (n - 1) / 2);
    let mut ys = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            xs.push(d[(i, j)]);
            ys.push(c[(i, j)]);
        }
    }
    pearson(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_factor_market, FactorMarketParams};
    use crate::returns::{estimate_correlation, ReturnKind, ReturnsPanel};
    use nalgebra::DMatrix;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn ultrametric_matrix_scores_one() {
        // Two blocks of 3 at correlation 0.8 inside, 0.4 across: nested
        // heights sqrt(0.4) < sqrt(1.2).
        let m = DMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                1.0
            } else if i / 3 == j / 3 {
                0.8
            } else {
                0.4
            }
        });
        let c = CorrelationMatrix::from_matrix(m, Default::default()).unwrap();
        assert!((hierarchy_score(&c).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn equicorrelation_is_undefined() {
        assert!(hierarchy_score(&CorrelationMatrix::equicorrelation(5, 0.3).unwrap()).is_none());
    }

    #[test]
    fn white_noise_scores_below_factor_market() {
        let mut rng = crate::rng::seeded(21, 0);
        let (t, n) = (5000, 20);
        let noise = DMatrix::from_fn(t, n, |_, _| StandardNormal.sample(&mut rng));
        let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let dates = (0..t).map(|i| start + chrono::Days::new(i as u64)).collect();
        let tickers = (0..n).map(|i| format!("N{i}")).collect();
        let panel = ReturnsPanel::new(tickers, dates, noise, ReturnKind::Simple).unwrap();
        let white = hierarchy_score(&estimate_correlation(&panel).unwrap()).unwrap();

        let factor: f64 = (0..20)
            .map(|seed| {
                let p = synth_factor_market(&FactorMarketParams { seed, ..Default::default() })
                    .unwrap();
                hierarchy_score(&estimate_correlation(&p).unwrap()).unwrap()
            })
            .sum::<f64>()
            / 20.0;
        assert!(white < factor, "white {white} vs factor {factor}");
    }
}
