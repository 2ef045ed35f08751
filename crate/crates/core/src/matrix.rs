//! Correlation matrices, raw (unrepaired) matrices and elliptope coordinates.

use nalgebra::DMatrix;

use crate::error::{CorrError, Result};
use crate::linalg;

/// Tolerances used when checking membership of the elliptope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Smallest eigenvalue allowed is `-psd_tol`.
    pub psd_tol: f64,
    /// Allowed deviation of each diagonal entry from 1.
    pub diag_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd_tol: 1e-8,
            diag_tol: 1e-8,
        }
    }
}

/// A square matrix with finite entries and no other constraint, e.g. the
/// output of a generator network before repair.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    values: DMatrix<f64>,
}

impl RawMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() || values.nrows() == 0 {
            return Err(CorrError::Structure(format!(
                "expected a non-empty square matrix, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            let n = values.nrows();
            return Err(CorrError::Structure(format!(
                "non-finite entry at ({}, {})",
                pos % n,
                pos / n
            )));
        }
        Ok(RawMatrix { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(CorrError::Structure("rows have inconsistent lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        RawMatrix::new(DMatrix::from_row_slice(n, n, &flat))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.values[(i, j)] - self.values[(j, i)]).abs());
            }
        }
        worst
    }
}

impl From<CorrelationMatrix> for RawMatrix {
    fn from(m: CorrelationMatrix) -> Self {
        RawMatrix { values: m.values }
    }
}

/// Symmetric, unit-diagonal, positive-semidefinite matrix.
///
/// The upper triangle is authoritative: constructors mirror it into the
/// lower triangle so stored values are always exactly symmetric, and the
/// diagonal is always exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    values: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn identity(n: usize) -> Self {
        CorrelationMatrix {
            values: DMatrix::identity(n, n),
        }
    }

    /// Every off-diagonal entry equal to `rho`. Valid for
    /// `-1/(n-1) <= rho <= 1`.
    pub fn equicorrelation(n: usize, rho: f64) -> Result<Self> {
        let mut m = DMatrix::from_element(n, n, rho);
        m.fill_diagonal(1.0);
        CorrelationMatrix::from_matrix(m, Tolerances::default())
    }

    /// Builds a correlation matrix from `m`, reading only its upper triangle.
    ///
    /// The diagonal must lie within `tol.diag_tol` of 1 (it is then set to
    /// exactly 1), off-diagonal entries must lie in `[-1, 1]` and the
    /// smallest eigenvalue must be at least `-tol.psd_tol`.
    pub fn from_matrix(m: DMatrix<f64>, tol: Tolerances) -> Result<Self> {
        let raw = RawMatrix::new(m)?;
        let n = raw.n();
        let mut values = raw.into_values();
        for i in 0..n {
            let d = values[(i, i)];
            if (d - 1.0).abs() > tol.diag_tol {
                return Err(CorrError::Structure(format!(
                    "diagonal entry {i} is {d}, expected 1"
                )));
            }
            values[(i, i)] = 1.0;
            for j in (i + 1)..n {
                let v = values[(i, j)];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(CorrError::Structure(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                values[(j, i)] = v;
            }
        }
        let min_eigenvalue = linalg::min_eigenvalue(&values);
        if min_eigenvalue < -tol.psd_tol {
            return Err(CorrError::NotPsd { min_eigenvalue });
        }
        Ok(CorrelationMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn to_raw(&self) -> RawMatrix {
        RawMatrix {
            values: self.values.clone(),
        }
    }

    /// Off-diagonal upper-triangular entries in row-major order.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.values[(i, j)]);
            }
        }
        out
    }

    pub fn to_upper_vector(&self) -> ElliptopeVector {
        ElliptopeVector {
            n: self.n(),
            coeffs: self.off_diagonal(),
        }
    }

    pub fn from_upper_vector(v: &ElliptopeVector) -> Result<Self> {
        Self::from_upper_vector_with(v, Tolerances::default())
    }

    pub fn from_upper_vector_with(v: &ElliptopeVector, tol: Tolerances) -> Result<Self> {
        let n = v.n;
        let mut m = DMatrix::identity(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                m[(i, j)] = v.coeffs[k];
                m[(j, i)] = v.coeffs[k];
                k += 1;
            }
        }
        CorrelationMatrix::from_matrix(m, tol)
    }

    /// `result[i][j] = self[perm[i]][perm[j]]`.
    pub fn permute(&self, perm: &Permutation) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(CorrError::Structure(format!(
                "permutation of length {} applied to a {}x{} matrix",
                perm.len(),
                self.n(),
                self.n()
            )));
        }
        let p = perm.as_slice();
        let n = self.n();
        let values = DMatrix::from_fn(n, n, |i, j| self.values[(p[i], p[j])]);
        Ok(CorrelationMatrix { values })
    }

    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        linalg::sym_eigenvalues_desc(&self.values)
    }
}

/// The `n(n-1)/2` upper-triangular coefficients `(C12, …, C1n, C23, …)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElliptopeVector {
    n: usize,
    coeffs: Vec<f64>,
}

impl ElliptopeVector {
    /// Infers `n` from the coefficient count, which must be a triangular
    /// number `n(n-1)/2` with `n >= 2`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let len = coeffs.len();
        let n = side_from_triangular(len).ok_or_else(|| {
            CorrError::Shape(format!("{len} is not n(n-1)/2 for any n >= 2"))
        })?;
        Ok(ElliptopeVector { n, coeffs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

fn side_from_triangular(len: usize) -> Option<usize> {
    if len == 0 {
        return None;
    }
    let n = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    (n >= 2 && n * (n - 1) / 2 == len).then_some(n)
}

/// A bijection on `{0, …, n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n || seen[i] {
                return Err(CorrError::Structure(format!(
                    "not a permutation of 0..{n}: {indices:?}"
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation(indices))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Permutation(inv)
    }

    /// `(self ∘ other)[i] = other[self[i]]`, i.e. permuting by `other` and
    /// then by `self` equals permuting once by the composition.
    pub fn then(&self, other: &Permutation) -> Self {
        Permutation(self.0.iter().map(|&i| other.0[i]).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Outcome of checking a raw matrix against the elliptope constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub is_valid: bool,
    pub max_diag_deviation: f64,
    pub max_asymmetry: f64,
    pub min_eigenvalue: f64,
    pub out_of_range_count: usize,
}

/// Checks exact symmetry, unit diagonal within `diag_tol`, entries within
/// `[-1 - diag_tol, 1 + diag_tol]` and smallest eigenvalue `>= -psd_tol`.
pub fn validate(m: &RawMatrix, tol: Tolerances) -> ValidationReport {
    let v = m.values();
    let n = m.n();
    let max_diag_deviation = (0..n)
        .map(|i| (v[(i, i)] - 1.0).abs())
        .fold(0.0, f64::max);
    let max_asymmetry = m.max_asymmetry();
    let bound = 1.0 + tol.diag_tol;
    let out_of_range_count = v.iter().filter(|x| x.abs() > bound).count();
    let min_eigenvalue = linalg::min_eigenvalue(v);
    let is_valid = max_asymmetry == 0.0
        && max_diag_deviation <= tol.diag_tol
        && min_eigenvalue >= -tol.psd_tol
        && out_of_range_count == 0;
    ValidationReport {
        is_valid,
        max_diag_deviation,
        max_asymmetry,
        min_eigenvalue,
        out_of_range_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(rows: &[&[f64]]) -> RawMatrix {
        RawMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_is_valid() {
        let r = validate(&CorrelationMatrix::identity(3).to_raw(), Tolerances::default());
        assert!(r.is_valid);
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-12);
        assert_eq!(r.max_diag_deviation, 0.0);
    }

    #[test]
    fn tridiagonal_ones_is_not_psd() {
        // Characteristic polynomial (1-λ)((1-λ)² - 2): roots 1, 1 ± √2.
        let r = validate(
            &raw(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 1.0], &[0.0, 1.0, 1.0]]),
            Tolerances::default(),
        );
        assert!(!r.is_valid);
        assert!((r.min_eigenvalue - (1.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn shrunken_diagonal_is_flagged() {
        let mut m = DMatrix::from_element(3, 3, 0.3);
        m.fill_diagonal(0.998);
        let r = validate(&RawMatrix::new(m).unwrap(), Tolerances::default());
        assert!(!r.is_valid);
        assert!((r.max_diag_deviation - 0.002).abs() < 1e-12);
    }

    #[test]
    fn asymmetry_is_flagged_exactly() {
        let r = validate(
            &raw(&[&[1.0, 0.5], &[0.5 + 1e-15, 1.0]]),
            Tolerances::default(),
        );
        assert!(!r.is_valid);
        assert!(r.max_asymmetry > 0.0);
    }

    #[test]
    fn raw_rejects_non_square_and_non_finite() {
        assert!(matches!(
            RawMatrix::new(DMatrix::zeros(2, 3)),
            Err(CorrError::Structure(_))
        ));
        assert!(matches!(
            RawMatrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]),
            Err(CorrError::Structure(_))
        ));
    }

    #[test]
    fn upper_vector_examples() {
        let two = CorrelationMatrix::from_upper_vector(&ElliptopeVector::new(vec![0.0]).unwrap())
            .unwrap();
        assert_eq!(two, CorrelationMatrix::identity(2));

        let ones =
            CorrelationMatrix::from_upper_vector(&ElliptopeVector::new(vec![1.0; 3]).unwrap())
                .unwrap();
        assert!(ones.values().iter().all(|&x| x == 1.0));

        // det = 1 + 2(0.9)(0.9)(-0.9) - 3(0.81) = -2.888 < 0
        let det: f64 = 1.0 + 2.0 * (0.9 * 0.9 * -0.9) - (0.81 + 0.81 + 0.81);
        assert!(det < 0.0);
        let bad = CorrelationMatrix::from_upper_vector(
            &ElliptopeVector::new(vec![0.9, 0.9, -0.9]).unwrap(),
        );
        assert!(matches!(bad, Err(CorrError::NotPsd { min_eigenvalue }) if min_eigenvalue < 0.0));
    }

    #[test]
    fn non_triangular_length_is_shape_error() {
        for len in [0, 2, 4, 5, 7] {
            assert!(matches!(ElliptopeVector::new(vec![0.0; len]), Err(CorrError::Shape(_))));
        }
        assert_eq!(ElliptopeVector::new(vec![0.0; 10]).unwrap().n(), 5);
    }

    #[test]
    fn to_upper_vector_reads_off_coefficients() {
        assert_eq!(CorrelationMatrix::identity(3).to_upper_vector().coeffs(), &[0.0; 3]);
        let m = CorrelationMatrix::equicorrelation(2, 0.36).unwrap();
        assert_eq!(m.to_upper_vector().coeffs(), &[0.36]);
    }

    #[test]
    fn permutation_rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(p.then(&p.inverse()), Permutation::identity(3));
    }

    #[test]
    fn permute_identity_and_inverse() {
        let v = ElliptopeVector::new(vec![0.2, -0.1, 0.4, 0.3, 0.25, -0.05]).unwrap();
        let m = CorrelationMatrix::from_upper_vector(&v).unwrap();
        assert_eq!(m.permute(&Permutation::identity(4)).unwrap(), m);
        let p = Permutation::new(vec![3, 1, 0, 2]).unwrap();
        let back = m.permute(&p).unwrap().permute(&p.inverse()).unwrap();
        assert_eq!(back, m);
        assert!(m.permute(&Permutation::identity(3)).is_err());
    }
}
