//! Thin wrappers over the symmetric eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Returns `(A + Aᵀ) / 2`.
pub fn symmetrized(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigen-decomposition of the symmetric part of `a`, sorted by descending
/// eigenvalue. Columns of the returned matrix are the eigenvectors.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrized(a));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues_desc(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(symmetrized(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues_desc(a)
        .last()
        .copied()
        .unwrap_or(f64::INFINITY)
}

/// Rebuilds `V diag(λ) Vᵀ` and forces exact symmetry of the result.
pub fn recompose(values: &DVector<f64>, vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let scaled = vectors * DMatrix::from_diagonal(values);
    symmetrized(&(scaled * vectors.transpose()))
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sum of `values` after sorting, so the result does not depend on the
/// order in which the values were supplied.
pub fn order_free_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_desc_sorted_and_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let (vals, vecs) = sym_eigen_desc(&a);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let back = recompose(&vals, &vecs);
        assert!(frobenius(&(back - a)) < 1e-12);
    }

    #[test]
    fn order_free_sum_ignores_input_order() {
        let mut a = vec![0.1, 1e16, -1e16, 0.2, 0.3];
        let mut b = vec![0.3, -1e16, 0.2, 1e16, 0.1];
        assert_eq!(order_free_sum(&mut a).to_bits(), order_free_sum(&mut b).to_bits());
    }
}
