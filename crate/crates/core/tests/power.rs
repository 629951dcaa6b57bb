use classplan::power::z_test_rejects;
use classplan::*;
use proptest::prelude::*;
use statrs::distribution::{Binomial, ContinuousCDF, Discrete, Normal};

fn spec(p1: f64, p2: f64, n1: f64, n2: f64) -> TwoProportionSpec {
    TwoProportionSpec::new(p1, p2, n1, n2, 0.05).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn power_grows_with_sample_size(p1 in 0.05f64..0.95, d in 0.02f64..0.5, n in 5f64..500.0) {
        let p2 = (p1 + d).min(0.99);
        let a = analytic_power(&spec(p1, p2, n, n)).unwrap();
        let b = analytic_power(&spec(p1, p2, 2.0 * n, 2.0 * n)).unwrap();
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn power_grows_with_effect(p1 in 0.05f64..0.5, d in 0.01f64..0.2, n in 5f64..500.0) {
        let a = analytic_power(&spec(p1, p1 + d, n, n)).unwrap();
        let b = analytic_power(&spec(p1, p1 + 2.0 * d, n, n)).unwrap();
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn plan_achieves_requested_power(
        p1 in 0.05f64..0.95,
        p2 in 0.05f64..0.95,
        f in 0.1f64..0.9,
        power in 0.5f64..0.99,
    ) {
        prop_assume!((p1 - p2).abs() > 0.02);
        let plan = allocation_samsize(p1, p2, f, 0.05, power).unwrap();
        // Plans below one case per group cannot be evaluated as designs.
        prop_assume!(plan.n1 >= 1.0 && plan.n2 >= 1.0);
        let achieved = analytic_power(&spec(p1, p2, plan.n1, plan.n2)).unwrap();
        // The closed form solves for the near rejection tail alone; the far
        // tail only adds power, and can be sizeable for very small plans.
        let (n1, n2) = (plan.n1, plan.n2);
        let pbar = (n1 * p1 + n2 * p2) / (n1 + n2);
        let std = Normal::standard();
        let s0 = std.inverse_cdf(0.975) * ((1.0 / n1 + 1.0 / n2) * pbar * (1.0 - pbar)).sqrt();
        let s1 = (p1 * (1.0 - p1) / n1 + p2 * (1.0 - p2) / n2).sqrt();
        let near = 1.0 - std.cdf((s0 - (p1 - p2).abs()) / s1);
        prop_assert!((near - power).abs() < 1e-6, "near tail {near} vs {power}");
        prop_assert!(achieved >= near - 1e-9, "{achieved} vs {near}");
    }

    #[test]
    fn relabeling_symmetry(p1 in 0.05f64..0.95, p2 in 0.05f64..0.95, f in 0.1f64..0.9) {
        prop_assume!((p1 - p2).abs() > 0.02);
        let a = allocation_samsize(p1, p2, f, 0.05, 0.8).unwrap();
        let b = allocation_samsize(p2, p1, 1.0 - f, 0.05, 0.8).unwrap();
        prop_assert!((a.total() - b.total()).abs() < 1e-6 * a.total());
    }
}

#[test]
fn reference_values() {
    assert!((analytic_power(&spec(0.75, 0.9, 25.0, 1e5)).unwrap() - 0.6467).abs() < 5e-4);
    assert!((equal_allocation_samsize(0.75, 0.9, 0.05, 0.8).unwrap() - 99.54).abs() < 0.01);
    assert_eq!(n_new_for_fixed_n_old(0.75, 25, 0.975, 0.1, 0.9).unwrap(), 63);
    assert_eq!(n_new_for_fixed_n_old(0.75, 25, 0.96, 0.1, 0.9).unwrap(), 117);
    assert_eq!(n_new_for_fixed_n_old(0.75, 25, 0.99, 0.05, 0.95).unwrap(), 116);
}

#[test]
fn n_new_meets_power() {
    for &(p_new, alpha, power) in &[(0.975, 0.1, 0.9), (0.96, 0.1, 0.9), (0.95, 0.05, 0.8), (0.99, 0.05, 0.95)] {
        let n = n_new_for_fixed_n_old(0.75, 25, p_new, alpha, power).unwrap();
        let got = analytic_power(&TwoProportionSpec::new(0.75, p_new, 25.0, n as f64, alpha).unwrap()).unwrap();
        assert!(got >= power - 1e-3, "{p_new} {alpha} {power}: n={n} power {got}");
    }
}

#[test]
fn unreachable_power_is_infeasible() {
    match n_new_for_fixed_n_old(0.75, 25, 0.85, 0.05, 0.95) {
        Err(Error::Infeasible { max_power, .. }) => assert!(max_power < 0.95),
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn equal_proportions_are_rejected() {
    assert!(equal_allocation_samsize(0.8, 0.8, 0.05, 0.8).is_err());
}

/// Rejection probability by full enumeration of both binomials.
fn exact_power(p1: f64, p2: f64, n1: u64, n2: u64) -> f64 {
    let (b1, b2) = (Binomial::new(p1, n1).unwrap(), Binomial::new(p2, n2).unwrap());
    let z = 1.959_963_984_540_054;
    let mut total = 0.0;
    for k1 in 0..=n1 {
        for k2 in 0..=n2 {
            if z_test_rejects(k1, n1, k2, n2, z) {
                total += b1.pmf(k1) * b2.pmf(k2);
            }
        }
    }
    total
}

#[test]
fn simulation_matches_enumeration() {
    for (i, &(p1, p2, n1, n2)) in [(0.75, 0.9, 25u64, 30u64), (0.5, 0.5, 10, 10), (0.2, 0.6, 7, 29)].iter().enumerate()
    {
        let exact = exact_power(p1, p2, n1, n2);
        let mc = simulated_power(&spec(p1, p2, n1 as f64, n2 as f64), 50_000, i as u64).unwrap();
        let se = (exact * (1.0 - exact) / 50_000.0).sqrt();
        assert!((mc.estimate - exact).abs() < 3.0 * se, "{p1} {p2}: {} vs {exact}", mc.estimate);
    }
}

#[test]
fn simulation_is_thread_independent() {
    let s = spec(0.75, 0.9, 25.0, 1000.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulated_power(&s, 30_000, 5).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn non_integer_sizes_are_flagged() {
    let mc = simulated_power(&spec(0.75, 0.9, 25.4, 100.0), 2000, 1).unwrap();
    assert!(mc.rounded);
    assert!(!simulated_power(&spec(0.75, 0.9, 25.0, 100.0), 2000, 1).unwrap().rounded);
}
