use corrgan_core::canonical::{canonicalize, correlation_distance, single_linkage};
use corrgan_core::rng;
use corrgan_core::sampling::{sample_onion, SamplerConfig};
use corrgan_core::{CorrelationMatrix, Permutation};
use rand::seq::SliceRandom;

fn bits(m: &CorrelationMatrix) -> Vec<u64> {
    m.values().iter().map(|x| x.to_bits()).collect()
}

#[test]
fn representatives_are_bitwise_equal_under_permutation() {
    let set = sample_onion(&SamplerConfig { n: 10, count: 100, seed: 8 }).unwrap();
    let mut r = rng::seeded(8, 200);
    for m in &set {
        let mut p: Vec<usize> = (0..m.n()).collect();
        p.shuffle(&mut r);
        let shuffled = m.permute(&Permutation::new(p).unwrap()).unwrap();
        assert_eq!(bits(&canonicalize(m)), bits(&canonicalize(&shuffled)));
    }
}

#[test]
fn canonicalize_is_idempotent() {
    for n in [3, 7, 20] {
        for m in sample_onion(&SamplerConfig { n, count: 100, seed: 40 + n as u64 }).unwrap() {
            let once = canonicalize(&m);
            assert_eq!(bits(&canonicalize(&once)), bits(&once));
        }
    }
}

#[test]
fn cophenetic_is_subdominant() {
    for m in sample_onion(&SamplerConfig { n: 9, count: 50, seed: 5 }).unwrap() {
        let d = correlation_distance(&m);
        let c = single_linkage(&d).cophenetic();
        for i in 0..9 {
            for j in 0..9 {
                assert!(c[(i, j)] <= d[(i, j)]);
            }
        }
    }
}
