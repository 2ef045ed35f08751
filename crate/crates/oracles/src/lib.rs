//! Slow, independent reference implementations for tests.
//!
//! Nothing here shares code with the production crates: each routine is a
//! textbook or brute-force method chosen to be easy to audit.

use nalgebra::DMatrix;

/// Two-sample Kolmogorov–Smirnov statistic, evaluated at every pooled
/// sample point by counting.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let ecdf = |s: &[f64], x: f64| s.partition_point(|&v| v <= x) as f64 / s.len() as f64;
    a.iter()
        .chain(b.iter())
        .map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs())
        .fold(0.0, f64::max)
}

/// Asymptotic p-value `Q(sqrt(n_e) D)` with `Q(t) = 2 Σ (-1)^{k-1} e^{-2k²t²}`.
pub fn ks_p_value(d: f64, n_a: usize, n_b: usize) -> f64 {
    let ne = (n_a * n_b) as f64 / (n_a + n_b) as f64;
    let t = ne.sqrt() * d;
    if t < 1e-3 {
        return 1.0;
    }
    let mut q = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * t * t).exp();
        q += if k as usize % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * q).clamp(0.0, 1.0)
}

fn gram(v: &[Vec<f64>]) -> DMatrix<f64> {
    let n = v.len();
    DMatrix::from_fn(n, n, |i, j| v[i].iter().zip(&v[j]).map(|(x, y)| x * y).sum())
}

/// Nearest correlation matrix by projected gradient on the factor form
/// `X = V Vᵀ` with unit-norm rows of `V`.
pub fn nearest_correlation_pg(a: &DMatrix<f64>, iterations: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let a = (a + a.transpose()) * 0.5;
    // Start from rows of the identity so the factor has full rank.
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let step = 0.05 / n as f64;
    for _ in 0..iterations {
        let x = gram(&v);
        let r = &x - &a;
        let mut next = v.clone();
        for i in 0..n {
            for k in 0..n {
                let g: f64 = (0..n).map(|j| 4.0 * r[(i, j)] * v[j][k]).sum();
                next[i][k] -= step * g;
            }
            let norm = next[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            next[i].iter_mut().for_each(|x| *x /= norm);
        }
        v = next;
    }
    gram(&v)
}

/// Eigenvalues and eigenvectors (columns) of a symmetric matrix by cyclic
/// Jacobi rotations.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = (a + a.transpose()) * 0.5;
    let mut q = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                if m[(p, r)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (2.0 * m[(p, r)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkr) = (m[(k, p)], m[(k, r)]);
                    m[(k, p)] = c * mkp - s * mkr;
                    m[(k, r)] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let (mpk, mrk) = (m[(p, k)], m[(r, k)]);
                    m[(p, k)] = c * mpk - s * mrk;
                    m[(r, k)] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let (qkp, qkr) = (q[(k, p)], q[(k, r)]);
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), q)
}

/// Frobenius-nearest PSD matrix by projected gradient descent on the cone:
/// `X ← P(X - t (X - A))` with the cone projection computed by Jacobi.
/// With `t = 1/2` the iteration contracts to the unique minimiser.
pub fn psd_projection_pg(a: &DMatrix<f64>, iterations: usize) -> DMatrix<f64> {
    let a = (a + a.transpose()) * 0.5;
    let n = a.nrows();
    let cone = |x: &DMatrix<f64>| {
        let (vals, vecs) = jacobi_eigen(x);
        let mut out = DMatrix::zeros(n, n);
        for (k, &l) in vals.iter().enumerate() {
            if l > 0.0 {
                let c = vecs.column(k);
                out += c * c.transpose() * l;
            }
        }
        out
    };
    let mut x = DMatrix::zeros(n, n);
    for _ in 0..iterations {
        x = cone(&(&x - (&x - &a) * 0.5));
    }
    x
}

/// Minimum spanning tree weight by enumerating all `n^(n-2)` labelled trees
/// through their Prüfer sequences.
pub fn mst_weight_bruteforce(d: &DMatrix<f64>) -> f64 {
    let n = d.nrows();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return d[(0, 1)];
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    let mut best = f64::INFINITY;
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut w = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
            w += d[(leaf, s)];
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        w += d[(rest[0], rest[1])];
        best = best.min(w);

        let mut k = 0;
        loop {
            if k == len {
                return best;
            }
            seq[k] += 1;
            if seq[k] < n {
                break;
            }
            seq[k] = 0;
            k += 1;
        }
    }
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (hi - lo) / m as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}
