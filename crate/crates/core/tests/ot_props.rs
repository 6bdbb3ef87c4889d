mod common;

use common::{measure_pair, rng, uniform_measure};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use srw_core::linalg::squared_euclidean_cost;
use srw_core::{brute_force_ot, exact_ot, sinkhorn, CostMatrix, DiscreteMeasure};

fn cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> CostMatrix {
    squared_euclidean_cost(mu.points(), nu.points(), mu.dim()).unwrap()
}

proptest! {
    #![proptest_config(common::config(64))]

    #[test]
    fn exact_plan_is_feasible_vertex((mu, nu) in measure_pair(9, 4)) {
        let (plan, value) = exact_ot(&mu, &nu, &cost(&mu, &nu)).unwrap();
        prop_assert!(plan.max_marginal_violation() <= 1e-9);
        prop_assert!(plan.matrix().as_slice().iter().all(|&p| p >= 0.0));
        prop_assert!(plan.nonzeros(0.0).count() <= mu.len() + nu.len() - 1);
        prop_assert!((plan.cost(&cost(&mu, &nu)) - value).abs() <= 1e-12 * (1.0 + value));
    }

    #[test]
    fn exact_value_ignores_relabeling((mu, nu) in measure_pair(8, 3), seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut p: Vec<usize> = (0..mu.len()).collect();
        let mut q: Vec<usize> = (0..nu.len()).collect();
        p.shuffle(&mut r);
        q.shuffle(&mut r);
        let (mu2, nu2) = (mu.permuted(&p).unwrap(), nu.permuted(&q).unwrap());
        let a = exact_ot(&mu, &nu, &cost(&mu, &nu)).unwrap().1;
        let b = exact_ot(&mu2, &nu2, &cost(&mu2, &nu2)).unwrap().1;
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn exact_never_exceeds_sinkhorn((mu, nu) in measure_pair(8, 3), gamma in 0.01f64..2.0) {
        let c = cost(&mu, &nu);
        let exact = exact_ot(&mu, &nu, &c).unwrap().1;
        let out = sinkhorn(&mu, &nu, &c, gamma, None, 10_000, 1e-9).unwrap();
        // A plan whose rows are off by δ in L1 can undercut a feasible one by at most δ·max C.
        let infeasibility = out.marginal_error * c.max();
        prop_assert!(exact <= out.value + 1e-9 + infeasibility, "exact {exact} sinkhorn {}", out.value);
        prop_assert!(!out.converged || out.plan.max_marginal_violation() <= 1e-6);
    }

    #[test]
    fn warm_sinkhorn_restarts_immediately((mu, nu) in measure_pair(8, 3), gamma in 0.05f64..2.0) {
        let c = cost(&mu, &nu);
        let first = sinkhorn(&mu, &nu, &c, gamma, None, 10_000, 1e-6).unwrap();
        prop_assume!(first.converged);
        let again = sinkhorn(&mu, &nu, &c, gamma, Some(&first.state), 10_000, 1e-6).unwrap();
        prop_assert!(again.converged && again.iterations <= 2, "{} iterations", again.iterations);
    }

    #[test]
    fn cost_scaling_scales_values((mu, nu) in measure_pair(7, 3), scale in 0.01f64..100.0) {
        let c = cost(&mu, &nu);
        let mut scaled = c.clone();
        scaled.scale(scale);
        let a = exact_ot(&mu, &nu, &c).unwrap().1;
        let b = exact_ot(&mu, &nu, &scaled).unwrap().1;
        prop_assert!((b - scale * a).abs() <= 1e-10 * (1.0 + b.abs()));
        let s1 = sinkhorn(&mu, &nu, &c, 0.3, None, 10_000, 1e-9).unwrap();
        let s2 = sinkhorn(&mu, &nu, &scaled, 0.3 * scale, None, 10_000, 1e-9).unwrap();
        prop_assert!((s2.value - scale * s1.value).abs() <= 1e-6 * (1.0 + s2.value.abs()));
    }
}

#[test]
fn five_atoms_match_all_permutations() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..50 {
        let (mu, nu) = (uniform_measure(5, 3, 2.0), uniform_measure(5, 3, 2.0))
            .new_tree(&mut runner)
            .map(|t| proptest::strategy::ValueTree::current(&t))
            .unwrap();
        let c = cost(&mu, &nu);
        let mut best = f64::INFINITY;
        srw_core::ot::for_each_permutation(5, |p| {
            best = best.min(p.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>() / 5.0);
        });
        let exact = exact_ot(&mu, &nu, &c).unwrap().1;
        assert!((exact - best).abs() <= 1e-9);
        assert!((brute_force_ot(&mu, &nu, &c).unwrap() - best).abs() <= 1e-12);
    }
}

#[test]
fn small_gamma_sinkhorn_approaches_brute_force() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..30 {
        let (mu, nu) = (uniform_measure(5, 3, 2.0), uniform_measure(5, 3, 2.0))
            .new_tree(&mut runner)
            .map(|t| proptest::strategy::ValueTree::current(&t))
            .unwrap();
        let c = cost(&mu, &nu);
        let gamma = 1e-3 * c.mean();
        let out = sinkhorn(&mu, &nu, &c, gamma, None, 100_000, 1e-9).unwrap();
        let brute = brute_force_ot(&mu, &nu, &c).unwrap();
        assert!((out.value - brute).abs() <= 0.01 * brute, "{} vs {}", out.value, brute);
    }
}
