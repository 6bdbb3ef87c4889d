mod common;

use srw_core::linalg::squared_euclidean_cost;
use srw_core::synthetic::{disk_annulus_w2, GeneratorKind, GeneratorSpec};
use srw_core::{eig_sym, exact_ot, srw_bundle, DiscreteMeasure, SolverConfig, SymMatrix};

fn head_norm(p: &[f64], kstar: usize) -> f64 {
    p[..kstar].iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn covariance(m: &DiscreteMeasure) -> SymMatrix {
    let d = m.dim();
    SymMatrix::from_upper(d, |i, j| m.points().chunks_exact(d).map(|p| p[i] * p[j]).sum::<f64>() / m.len() as f64)
}

#[test]
fn weights_are_uniform_for_every_kind() {
    for kind in [
        GeneratorKind::HypercubePair,
        GeneratorKind::DiskAnnulusPair,
        GeneratorKind::WishartGaussianPair,
        GeneratorKind::DiracPair,
        GeneratorKind::SphereVsDirac,
    ] {
        let (mu, nu) = GeneratorSpec::new(kind, 4, 25, 9).generate().unwrap();
        for m in [&mu, &nu] {
            let w = 1.0 / m.len() as f64;
            assert!(m.weights().iter().all(|x| *x == w), "{}", kind.name());
            assert!(m.points().iter().all(|x| x.is_finite()));
            assert_eq!(m.dim(), 4);
        }
    }
}

#[test]
fn disk_and_annulus_supports() {
    for (d, kstar) in [(2, 2), (5, 2), (6, 3)] {
        let (mu, nu) = GeneratorSpec::disk_annulus(d, 400, kstar, 3).generate().unwrap();
        for p in mu.points().chunks_exact(d) {
            assert!(head_norm(p, kstar) <= 1.0);
            assert!(p[kstar..].iter().all(|v| (0.0..=1.0).contains(v)));
        }
        for p in nu.points().chunks_exact(d) {
            let r = head_norm(p, kstar);
            assert!((2.0 - 1e-12..=3.0 + 1e-12).contains(&r), "{r}");
            assert!(p[kstar..].iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn disk_to_annulus_matches_closed_form() {
    let (mu, nu) = GeneratorSpec::disk_annulus(2, 1000, 2, 1).generate().unwrap();
    let cost = squared_euclidean_cost(mu.points(), nu.points(), 2).unwrap();
    let value = exact_ot(&mu, &nu, &cost).unwrap().1;
    let truth = disk_annulus_w2();
    assert!((value - truth).abs() <= 0.1 * truth, "{value} vs {truth}");
}

#[test]
fn hypercube_displacements_live_in_the_leading_axes() {
    let spec = GeneratorSpec { coupled: true, ..GeneratorSpec::hypercube(6, 50, 2, 4) };
    let (mu, nu) = spec.generate().unwrap();
    for (x, y) in mu.points().chunks_exact(6).zip(nu.points().chunks_exact(6)) {
        assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(&x[2..], &y[2..]);
        for l in 0..2 {
            assert!(((y[l] - x[l]).abs() - 2.0).abs() <= 1e-12);
        }
    }
    let (_, nu) = GeneratorSpec::hypercube(6, 50, 2, 4).generate().unwrap();
    for y in nu.points().chunks_exact(6) {
        assert!(y[..2].iter().all(|v| (1.0..=3.0).contains(&v.abs())));
        assert!(y[2..].iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn wishart_samples_have_low_rank() {
    let (mu, nu) = GeneratorSpec::wishart(20, 10_000, 5, 0.0, 2).generate().unwrap();
    for m in [&mu, &nu] {
        let eig = eig_sym(&covariance(m)).unwrap();
        let top = eig.eigenvalues()[0];
        assert!(eig.eigenvalues().iter().filter(|&&l| l > 1e-6 * top).count() <= 5);
    }
    // Without noise, each atom is reproduced by its projection on the top-5 subspace.
    let (mu, _) = GeneratorSpec::wishart(12, 300, 5, 0.0, 8).generate().unwrap();
    let eig = eig_sym(&covariance(&mu)).unwrap();
    for p in mu.points().chunks_exact(12) {
        let mut proj = [0.0; 12];
        for l in 0..5 {
            let u = eig.eigenvector(l);
            let c: f64 = u.iter().zip(p).map(|(a, b)| a * b).sum();
            proj.iter_mut().zip(u).for_each(|(q, v)| *q += c * v);
        }
        let err = proj.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8 * (1.0 + p.iter().map(|v| v.abs()).fold(0.0, f64::max)), "{err:e}");
    }
    let (noisy, _) = GeneratorSpec::wishart(12, 300, 5, 0.5, 8).generate().unwrap();
    let eig = eig_sym(&covariance(&noisy)).unwrap();
    assert!(eig.eigenvalues()[11] > 0.1);
}

#[test]
fn identical_specs_give_identical_measures() {
    for kind in [GeneratorKind::HypercubePair, GeneratorKind::WishartGaussianPair, GeneratorKind::SphereVsDirac] {
        let spec = GeneratorSpec { noise_sigma: 0.3, ..GeneratorSpec::new(kind, 5, 40, 17) };
        assert_eq!(spec.generate().unwrap(), spec.generate().unwrap());
        let other = GeneratorSpec { seed: 18, ..spec.clone() };
        assert_ne!(spec.generate().unwrap(), other.generate().unwrap());
    }
}

#[test]
fn sampled_sphere_approaches_the_tight_constant() {
    let (d, n) = (10, 500);
    let spec = GeneratorSpec { exact_sphere: false, ..GeneratorSpec::new(GeneratorKind::SphereVsDirac, d, n, 5) };
    let (origin, sphere) = spec.generate().unwrap();
    // W² = 1: every atom is a unit vector. The coupling is forced, so SRW_k² is
    // the top-k eigenvalue sum of the sample second moment, whose spectrum
    // spreads up to the Marchenko–Pastur edge (1 + √(d/n))² / d.
    let moment = eig_sym(&covariance(&sphere)).unwrap();
    let edge = (1.0 + (d as f64 / n as f64).sqrt()).powi(2) / d as f64;
    for k in 1..=d {
        let r = srw_bundle(&origin, &sphere, &SolverConfig::bundle(k, 1e-9)).unwrap();
        assert!((r.value_squared - moment.top_k_sum(k)).abs() <= 1e-9);
        let target = k as f64 / d as f64;
        let spread = (k as f64 * (edge - 1.0 / d as f64)).min((d - k) as f64 / d as f64);
        assert!(r.value_squared >= target - 1e-9 && r.value_squared <= target + spread, "k={k}: {}", r.value_squared);
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(GeneratorSpec::hypercube(3, 10, 4, 0).generate().is_err());
    assert!(GeneratorSpec::hypercube(3, 0, 1, 0).generate().is_err());
    assert!(GeneratorSpec::wishart(3, 10, 0, 0.0, 0).generate().is_err());
    assert!(GeneratorSpec::wishart(3, 10, 2, -1.0, 0).generate().is_err());
}
