//! Daily return panels and Pearson correlation estimation.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use crate::error::{CorrError, Result};
use crate::linalg;
use crate::matrix::{CorrelationMatrix, Tolerances};

/// How the returns in a panel were computed. Recorded as metadata only;
/// estimation treats both the same way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReturnKind {
    #[default]
    Simple,
    Log,
}

/// `T x n` panel of daily returns, one column per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    returns: DMatrix<f64>,
    kind: ReturnKind,
}

impl ReturnsPanel {
    pub fn new(
        tickers: Vec<String>,
        dates: Vec<NaiveDate>,
        returns: DMatrix<f64>,
        kind: ReturnKind,
    ) -> Result<Self> {
        let (t, n) = returns.shape();
        if t < 2 || n < 2 {
            return Err(CorrError::Structure(format!(
                "panel needs at least 2 rows and 2 columns, got {t}x{n}"
            )));
        }
        if tickers.len() != n {
            return Err(CorrError::Structure(format!(
                "{} tickers for {n} return columns",
                tickers.len()
            )));
        }
        if dates.len() != t {
            return Err(CorrError::Structure(format!("{} dates for {t} rows", dates.len())));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(CorrError::Structure(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        if returns.iter().any(|x| !x.is_finite()) {
            return Err(CorrError::Structure("non-finite return".into()));
        }
        Ok(ReturnsPanel {
            tickers,
            dates,
            returns,
            kind,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn kind(&self) -> ReturnKind {
        self.kind
    }

    pub fn n_days(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    /// Rows `start..start + len`.
    pub fn rows(&self, start: usize, len: usize) -> Result<ReturnsPanel> {
        ReturnsPanel::new(
            self.tickers.clone(),
            self.dates[start..start + len].to_vec(),
            self.returns.rows(start, len).into_owned(),
            self.kind,
        )
    }

    /// Columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<ReturnsPanel> {
        ReturnsPanel::new(
            cols.iter().map(|&c| self.tickers[c].clone()).collect(),
            self.dates.clone(),
            self.returns.select_columns(cols),
            self.kind,
        )
    }
}

/// Pearson correlation of the panel's columns.
///
/// The result has an exact unit diagonal and is exactly symmetric. Rounding
/// can leave an eigenvalue slightly below zero; eigenvalues in
/// `(-psd_tol, 0)` are clipped to zero and the matrix is re-normalised.
pub fn estimate_correlation(p: &ReturnsPanel) -> Result<CorrelationMatrix> {
    let tol = Tolerances::default();
    let x = p.returns();
    let (t, n) = x.shape();
    let mut centered = x.clone();
    for (c, mut col) in centered.column_iter_mut().enumerate() {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo == hi {
            return Err(CorrError::Degenerate(format!(
                "ticker {} has zero variance",
                p.tickers()[c]
            )));
        }
        let mean = col.sum() / t as f64;
        col.add_scalar_mut(-mean);
    }
    let cov = centered.transpose() * &centered;
    let sd = DVector::from_iterator(n, (0..n).map(|i| cov[(i, i)].sqrt()));
    let mut corr = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
        }
    });
    corr = linalg::symmetrized(&corr);
    let (vals, vecs) = linalg::sym_eigen_desc(&corr);
    let min = vals[n - 1];
    if min < -tol.psd_tol {
        return Err(CorrError::NotPsd { min_eigenvalue: min });
    }
    if min < 0.0 {
        let clipped = vals.map(|v| v.max(0.0));
        let rebuilt = linalg::recompose(&clipped, &vecs);
        corr = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                (rebuilt[(i, j)] / (rebuilt[(i, i)] * rebuilt[(j, j)]).sqrt()).clamp(-1.0, 1.0)
            }
        });
    }
    CorrelationMatrix::from_matrix(corr, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{validate, Tolerances};
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn dates(t: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        (0..t).map(|i| start + chrono::Days::new(i as u64)).collect()
    }

    fn panel(cols: &[Vec<f64>]) -> ReturnsPanel {
        let t = cols[0].len();
        let m = DMatrix::from_fn(t, cols.len(), |r, c| cols[c][r]);
        let tickers = (0..cols.len()).map(|i| format!("T{i}")).collect();
        ReturnsPanel::new(tickers, dates(t), m, ReturnKind::Simple).unwrap()
    }

    #[test]
    fn identical_and_negated_columns() {
        let a = vec![0.01, -0.02, 0.005, 0.03, -0.01];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let c = estimate_correlation(&panel(&[a.clone(), a.clone(), neg])).unwrap();
        assert!((c.get(0, 1) - 1.0).abs() < 1e-14);
        assert!((c.get(0, 2) + 1.0).abs() < 1e-14);
        assert!(validate(&c.to_raw(), Tolerances::default()).is_valid);
    }

    #[test]
    fn independent_normals_are_weakly_correlated() {
        let mut rng = rng::seeded(11, 0);
        let cols: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..252).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let c = estimate_correlation(&panel(&cols)).unwrap();
        assert!(c.get(0, 1).abs() < 0.2);
    }

    #[test]
    fn constant_column_names_ticker() {
        let err = estimate_correlation(&panel(&[vec![0.01, 0.02, 0.03], vec![0.5; 3]]))
            .unwrap_err();
        assert!(matches!(err, CorrError::Degenerate(ref m) if m.contains("T1")));
    }

    #[test]
    fn panel_invariants_enforced() {
        let m = DMatrix::zeros(3, 2);
        let t = vec!["A".to_string(), "B".to_string()];
        let mut d = dates(3);
        assert!(ReturnsPanel::new(t.clone(), d.clone(), m.clone(), ReturnKind::Log).is_ok());
        d.swap(0, 1);
        assert!(ReturnsPanel::new(t.clone(), d, m.clone(), ReturnKind::Log).is_err());
        assert!(ReturnsPanel::new(vec!["A".into()], dates(3), m, ReturnKind::Log).is_err());
    }
}
