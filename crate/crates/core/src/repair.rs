//! Nearest correlation matrix in the Frobenius norm, by alternating
//! projections onto the PSD cone and the unit-diagonal subspace with
//! Dykstra's correction (Higham, 2002).

use nalgebra::DMatrix;

use crate::error::{CorrError, Result};
use crate::linalg;
use crate::matrix::{CorrelationMatrix, RawMatrix, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairConfig {
    /// Convergence threshold on the Frobenius distance between successive
    /// unit-diagonal iterates.
    pub tol: f64,
    pub max_iter: usize,
    /// Eigenvalue clip level of the PSD projection.
    pub psd_floor: f64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            tol: 1e-7,
            max_iter: 200,
            psd_floor: 0.0,
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(CorrError::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(CorrError::Config("max_iter must be >= 1".into()));
        }
        if !(self.psd_floor >= 0.0) {
            return Err(CorrError::Config(format!(
                "psd_floor must be >= 0, got {}",
                self.psd_floor
            )));
        }
        Ok(())
    }
}

/// `(A + Aᵀ) / 2`: the Frobenius-nearest symmetric matrix.
pub fn symmetrize(m: &RawMatrix) -> RawMatrix {
    RawMatrix::new(linalg::symmetrized(m.values())).expect("symmetric part of a finite matrix")
}

/// Clips eigenvalues below `floor` up to `floor`.
pub fn project_psd(m: &RawMatrix, floor: f64) -> Result<RawMatrix> {
    Ok(RawMatrix::new(project_psd_values(m.values(), floor)?)?)
}

fn project_psd_values(a: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = linalg::sym_eigen_desc(a);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(CorrError::Numerical("eigensolver produced non-finite values".into()));
    }
    if vals.iter().all(|&v| v >= floor) {
        return Ok(linalg::symmetrized(a));
    }
    Ok(linalg::recompose(&vals.map(|v| v.max(floor)), &vecs))
}

/// Copy with the diagonal overwritten by ones.
pub fn project_unit_diagonal(m: &RawMatrix) -> RawMatrix {
    let mut v = m.values().clone();
    v.fill_diagonal(1.0);
    RawMatrix::new(v).expect("finite input stays finite")
}

#[derive(Debug, Clone)]
pub struct Repaired {
    pub matrix: CorrelationMatrix,
    pub iterations: usize,
    /// Frobenius distance between the last two iterates.
    pub residual: f64,
    /// `||Y_k - A||_F` for each outer iteration, `A` the symmetrised input.
    pub distance_trace: Vec<f64>,
    /// Dual objective after each outer iteration (see [`dual_objective`]).
    pub dual_trace: Vec<f64>,
}

/// Repairs `m` into the nearest correlation matrix.
pub fn nearest_correlation(m: &RawMatrix, cfg: &RepairConfig) -> Result<Repaired> {
    cfg.validate()?;
    let a = linalg::symmetrized(m.values());
    let n = a.nrows();
    let mut y = a.clone();
    let mut correction = DMatrix::<f64>::zeros(n, n);
    let mut trace = Vec::new();
    let mut dual = Vec::new();
    for k in 1..=cfg.max_iter {
        let r = &y - &correction;
        let x = project_psd_values(&r, cfg.psd_floor)?;
        correction = &x - &r;
        let mut next = x;
        next.fill_diagonal(1.0);
        let residual = linalg::frobenius(&(&next - &y));
        y = next;
        trace.push(linalg::frobenius(&(&y - &a)));
        dual.push(dual_objective(&a, &y, &correction));
        if residual < cfg.tol {
            let matrix = finalize(y)?;
            return Ok(Repaired {
                matrix,
                iterations: k,
                residual,
                distance_trace: trace,
                dual_trace: dual,
            });
        }
        if k == cfg.max_iter {
            return Err(CorrError::NoConvergence {
                iterations: k,
                residual,
                last_iterate: Box::new(RawMatrix::new(y)?),
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Dual objective of the nearest-correlation problem at the current
/// iterate.
///
/// The corrected scheme is block coordinate ascent on the dual, with
/// multipliers `-correction` (negative semidefinite, for the PSD cone) and
/// a diagonal multiplier for the unit-diagonal constraint, and
/// `Y = A + correction + diagonal part`. Each outer iteration can only
/// increase this value, and it never exceeds `||X* - A||² / 2`.
pub fn dual_objective(a: &DMatrix<f64>, y: &DMatrix<f64>, correction: &DMatrix<f64>) -> f64 {
    let n = a.nrows() as f64;
    let u = a - y;
    let diag_multiplier_trace = n - a.trace() - correction.trace();
    a.dot(&u) - 0.5 * u.dot(&u) + diag_multiplier_trace
}

/// Clips the small negative eigenvalues left at the stopping point and
/// rescales back to an exact unit diagonal. The change is of the order of
/// the convergence tolerance.
fn finalize(y: DMatrix<f64>) -> Result<CorrelationMatrix> {
    let tol = Tolerances::default();
    let n = y.nrows();
    let clipped = project_psd_values(&y, 0.0)?;
    let d: Vec<f64> = (0..n).map(|i| clipped[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    let out = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (clipped[(i, j)] / (d[i] * d[j])).clamp(-1.0, 1.0)
        }
    });
    let out = linalg::symmetrized(&out);
    CorrelationMatrix::from_matrix(out, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::validate;

    fn raw(rows: &[&[f64]]) -> RawMatrix {
        RawMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn symmetrize_examples() {
        let s = symmetrize(&raw(&[&[0.0, 2.0], &[0.0, 0.0]]));
        assert_eq!(s, raw(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let sym = raw(&[&[1.0, 0.3], &[0.3, 2.0]]);
        assert_eq!(symmetrize(&sym), sym);
    }

    #[test]
    fn psd_projection_examples() {
        let p = project_psd(&raw(&[&[1.0, 0.0], &[0.0, -1.0]]), 0.0).unwrap();
        assert!((p.values() - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).abs().max() < 1e-15);
        let psd = raw(&[&[2.0, 0.5, 0.1], &[0.5, 1.0, 0.2], &[0.1, 0.2, 1.5]]);
        let q = project_psd(&psd, 0.0).unwrap();
        assert!((q.values() - psd.values()).abs().max() < 1e-12);
    }

    #[test]
    fn unit_diagonal_projection() {
        let mut v = DMatrix::from_element(3, 3, 0.4);
        v.fill_diagonal(0.998);
        let m = RawMatrix::new(v).unwrap();
        let p = project_unit_diagonal(&m);
        for i in 0..3 {
            assert_eq!(p.values()[(i, i)], 1.0);
            for j in 0..3 {
                if i != j {
                    assert_eq!(p.values()[(i, j)], 0.4);
                }
            }
        }
        assert_eq!(project_unit_diagonal(&p), p);
    }

    #[test]
    fn valid_input_is_a_fixed_point() {
        let c = CorrelationMatrix::from_matrix(
            DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.3, 1.0, 0.5, 0.2, 0.5, 1.0]),
            Tolerances::default(),
        )
        .unwrap();
        let out = nearest_correlation(&c.to_raw(), &RepairConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!((out.matrix.values() - c.values()).abs().max() < 1e-10);
    }

    #[test]
    fn output_is_valid_with_exact_diagonal() {
        let m = raw(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 1.0], &[0.0, 1.0, 1.0]]);
        let out = nearest_correlation(&m, &RepairConfig::default()).unwrap();
        let rep = validate(&out.matrix.to_raw(), Tolerances::default());
        assert!(rep.is_valid, "{rep:?}");
        assert_eq!(rep.max_diag_deviation, 0.0);
    }

    #[test]
    fn exhausted_budget_reports_last_iterate() {
        let m = raw(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 1.0], &[0.0, 1.0, 1.0]]);
        let cfg = RepairConfig { tol: 1e-14, max_iter: 3, psd_floor: 0.0 };
        match nearest_correlation(&m, &cfg) {
            Err(CorrError::NoConvergence { iterations, residual, last_iterate }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
                assert_eq!(last_iterate.n(), 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(RepairConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(RepairConfig { max_iter: 0, ..Default::default() }.validate().is_err());
    }
}
