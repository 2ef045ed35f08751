use corrgan_core::linalg::frobenius;
use corrgan_core::repair::{nearest_correlation, project_psd, RepairConfig};
use corrgan_core::rng;
use corrgan_core::sampling::{sample_onion, SamplerConfig};
use corrgan_core::{validate, RawMatrix, Tolerances};
use corrgan_oracles::{nearest_correlation_pg, psd_projection_pg};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const PINNED_OFF_NEAR: f64 = 0.7606898534;
const PINNED_OFF_FAR: f64 = 0.1572981061;

fn perturbed(n: usize, scale: f64, seed: u64) -> DMatrix<f64> {
    let base = sample_onion(&SamplerConfig { n, count: 1, seed }).unwrap().remove(0);
    let mut r = rng::seeded(seed, 100);
    let noise = Normal::new(0.0, scale).unwrap();
    let mut m = base.values().clone();
    for i in 0..n {
        for j in i + 1..n {
            let e: f64 = noise.sample(&mut r);
            m[(i, j)] += e;
            m[(j, i)] += e;
        }
    }
    m
}

#[test]
fn pinned_three_by_three() {
    let a = RawMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 1.0]]).unwrap();
    let out = nearest_correlation(&a, &RepairConfig::default()).unwrap();
    let expect = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0, PINNED_OFF_NEAR, PINNED_OFF_FAR,
            PINNED_OFF_NEAR, 1.0, PINNED_OFF_NEAR,
            PINNED_OFF_FAR, PINNED_OFF_NEAR, 1.0,
        ],
    );
    assert!((out.matrix.values() - &expect).abs().max() < 1e-3);
    // The pinned value itself agrees with the independent solver.
    let pg = nearest_correlation_pg(a.values(), 200_000);
    assert!((pg - expect).abs().max() < 1e-9);
}

#[test]
fn thousand_perturbed_matrices_converge() {
    let cfg = RepairConfig::default();
    let mut r = rng::seeded(77, 101);
    for k in 0..1000u64 {
        let n = r.random_range(3..=12);
        let scale = r.random_range(0.05..0.5);
        let m = RawMatrix::new(perturbed(n, scale, k)).unwrap();
        let out = nearest_correlation(&m, &cfg).unwrap_or_else(|e| panic!("case {k}: {e}"));
        assert!(out.iterations <= 200);
        let rep = validate(&out.matrix.to_raw(), Tolerances::default());
        assert!(rep.is_valid, "case {k}: {rep:?}");
        assert_eq!(rep.max_diag_deviation, 0.0);
        for w in out.dual_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "case {k}: dual objective decreased");
        }
        assert!((out.matrix.eigenvalues_desc().iter().sum::<f64>() - n as f64).abs() < 1e-8);
    }
}

#[test]
fn agrees_with_projected_gradient_oracle() {
    for k in 0..20u64 {
        let a = perturbed(5, 0.3, 1000 + k);
        let out = nearest_correlation(&RawMatrix::new(a.clone()).unwrap(), &RepairConfig::default()).unwrap();
        let oracle = nearest_correlation_pg(&a, 100_000);
        let gap = frobenius(&(out.matrix.values() - &oracle));
        assert!(gap < 1e-4, "case {k}: {gap}");
    }
}

#[test]
fn psd_projection_agrees_with_oracle() {
    let mut r = rng::seeded(4, 102);
    for k in 0..5 {
        let a = DMatrix::from_fn(4, 4, |_, _| r.random_range(-1.0..1.0));
        let a = (&a + a.transpose()) * 0.5;
        let p = project_psd(&RawMatrix::new(a.clone()).unwrap(), 0.0).unwrap();
        let oracle = psd_projection_pg(&a, 200);
        let d_fast = frobenius(&(p.values() - &a));
        let d_oracle = frobenius(&(oracle - &a));
        assert!((d_fast - d_oracle).abs() < 1e-6, "case {k}: {d_fast} vs {d_oracle}");
    }
}

#[test]
fn valid_matrices_are_fixed_points() {
    for m in sample_onion(&SamplerConfig { n: 8, count: 50, seed: 3 }).unwrap() {
        let out = nearest_correlation(&m.to_raw(), &RepairConfig::default()).unwrap();
        assert!((out.matrix.values() - m.values()).abs().max() < 1e-10);
    }
}
