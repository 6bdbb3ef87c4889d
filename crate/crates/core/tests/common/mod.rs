#![allow(dead_code)]

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use srw_core::{DiscreteMeasure, OmegaMatrix, SymMatrix};

pub fn sym_matrix(d: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-5.0f64..5.0, d * d).prop_map(move |v| SymMatrix::from_upper(d, |i, j| v[i * d + j]))
}

pub fn psd_matrix(d: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |a| {
        SymMatrix::from_upper(d, |i, j| (0..d).map(|l| a[i * d + l] * a[j * d + l]).sum())
    })
}

pub fn uniform_measure(n: usize, d: usize, scale: f64) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(-scale..scale, n * d).prop_map(move |pts| DiscreteMeasure::uniform(d, pts).unwrap())
}

pub fn weighted_measure(n: usize, d: usize) -> impl Strategy<Value = DiscreteMeasure> {
    (prop::collection::vec(-3.0f64..3.0, n * d), prop::collection::vec(0.05f64..1.0, n))
        .prop_map(move |(pts, w)| DiscreteMeasure::from_unnormalized(d, pts, w).unwrap())
}

/// Two measures of the same dimension, `2..=max_n` atoms each.
pub fn measure_pair(max_n: usize, max_d: usize) -> impl Strategy<Value = (DiscreteMeasure, DiscreteMeasure)> {
    (2..=max_n, 2..=max_n, 2..=max_d).prop_flat_map(|(n, m, d)| (weighted_measure(n, d), weighted_measure(m, d)))
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_measure(rng: &mut StdRng, n: usize, d: usize, scales: &[f64]) -> DiscreteMeasure {
    let pts = (0..n * d).map(|i| scales[i % scales.len()] * rng.random_range(-1.0..1.0)).collect();
    DiscreteMeasure::uniform(d, pts).unwrap()
}

/// Uniformly spread feasible point: a convex combination of random rank-`k`
/// coordinate projectors in a random rotation.
pub fn random_omega(rng: &mut StdRng, d: usize, k: usize) -> OmegaMatrix {
    let mut lambda: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
    // Rescale into the capped simplex by bisection on a common shift.
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = lambda.iter().map(|l| (l + mid).clamp(0.0, 1.0)).sum();
        if s < k as f64 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lambda.iter_mut().for_each(|l| *l = (*l + hi).clamp(0.0, 1.0));
    let q = random_orthogonal(rng, d);
    let m = SymMatrix::from_upper(d, |i, j| (0..d).map(|l| q[i * d + l] * lambda[l] * q[j * d + l]).sum());
    srw_core::project_spectrahedron(&m, k).unwrap()
}

/// Gram–Schmidt on a Gaussian-ish matrix, row-major.
pub fn random_orthogonal(rng: &mut StdRng, d: usize) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for u in &q {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    (0..d * d).map(|idx| q[idx % d][idx / d]).collect()
}

pub fn random_sym(rng: &mut StdRng, d: usize) -> SymMatrix {
    SymMatrix::from_upper(d, |_, _| rng.random_range(-5.0..5.0))
}

pub fn random_psd(rng: &mut StdRng, d: usize) -> SymMatrix {
    let a: Vec<f64> = (0..d * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    SymMatrix::from_upper(d, |i, j| (0..d).map(|l| a[i * d + l] * a[j * d + l]).sum())
}

/// Fixed-seed proptest settings so failures replay across runs.
pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}
