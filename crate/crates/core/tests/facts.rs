use corrgan_core::canonical::correlation_distance;
use corrgan_core::facts::mst::mst;
use corrgan_core::facts::spectrum::{
    eigen_spectrum, marchenko_pastur_density, perron_frobenius_check, MarchenkoPasturParams,
};
use corrgan_core::ingest::{synth_factor_market, FactorMarketParams, TRADING_YEAR};
use corrgan_core::sampling::{sample_onion, SamplerConfig};
use corrgan_core::{estimate_correlation, ReturnKind, ReturnsPanel};
use corrgan_oracles::{mst_weight_bruteforce, simpson};
use corrgan_core::rng;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn mst_weight_matches_cayley_enumeration() {
    for m in sample_onion(&SamplerConfig { n: 7, count: 20, seed: 70 }).unwrap() {
        let tree = mst(&m);
        assert_eq!(tree.edges.len(), 6);
        let oracle = mst_weight_bruteforce(&correlation_distance(&m));
        assert!((tree.total_weight() - oracle).abs() < 1e-12);
    }
}

#[test]
fn marchenko_pastur_density_integrates_to_one() {
    for q in [0.1, 0.4, 0.5, 0.9] {
        let p = MarchenkoPasturParams::new(q, 1.0).unwrap();
        // Substituting λ = c + h cos θ removes the square-root endpoints.
        let c = (p.lambda_plus + p.lambda_minus) / 2.0;
        let h = (p.lambda_plus - p.lambda_minus) / 2.0;
        let integral = simpson(
            |t: f64| marchenko_pastur_density(&p, c - h * t.cos()) * h * t.sin(),
            0.0,
            std::f64::consts::PI,
            20_000,
        );
        assert!((integral - 1.0).abs() < 1e-4, "q={q}: {integral}");
    }
}

fn white_noise(n: usize, t: usize, seed: u64) -> ReturnsPanel {
    let mut r = rng::seeded(seed, 300);
    let returns = DMatrix::from_fn(t, n, |_, _| StandardNormal.sample(&mut r));
    let start = chrono::NaiveDate::from_ymd_opt(2001, 1, 1).unwrap();
    let dates = (0..t).map(|k| start + chrono::Days::new(k as u64)).collect();
    let tickers = (0..n).map(|i| format!("W{i}")).collect();
    ReturnsPanel::new(tickers, dates, returns, ReturnKind::Simple).unwrap()
}

#[test]
fn white_noise_spectrum_fills_the_bulk() {
    let (n, t) = (100, TRADING_YEAR);
    let p = MarchenkoPasturParams::new(n as f64 / t as f64, 1.0).unwrap();
    let mut inside = 0;
    let mut total = 0;
    for seed in 0..5 {
        let c = estimate_correlation(&white_noise(n, t, seed)).unwrap();
        for l in c.eigenvalues_desc() {
            total += 1;
            inside += (l > p.lambda_minus - 0.05 && l < p.lambda_plus + 0.05) as usize;
        }
    }
    assert!(inside as f64 >= 0.98 * total as f64, "{inside}/{total}");
}

#[test]
fn factor_market_has_a_market_mode() {
    let mut dominant = 0;
    for seed in 0..100 {
        let c = estimate_correlation(
            &synth_factor_market(&FactorMarketParams { seed, ..Default::default() }).unwrap(),
        )
        .unwrap();
        let s = eigen_spectrum(&c, TRADING_YEAR).unwrap();
        assert!(s.trace_error() < 1e-8);
        assert!(perron_frobenius_check(&c).holds);
        dominant += (s.eigenvalues[0] / s.eigenvalues[1] > 3.0) as usize;
    }
    assert!(dominant >= 95, "{dominant}/100");
}
