use classplan::special::{beta_inc, beta_quantile};
use classplan::*;
use proptest::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

fn obs(k: f64, n: f64) -> BinomialObservation {
    BinomialObservation::new(k, n).unwrap()
}

fn width(method: IntervalMethod, p: f64, n: u64) -> f64 {
    WidthPlan::default().with_method(method).interval_at(p, n).unwrap().width()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn incomplete_beta_round_trip(a in 0.5f64..200.0, b in 0.5f64..200.0, p in 1e-6f64..(1.0 - 1e-6)) {
        let x = beta_quantile(p, a, b).unwrap();
        let back = beta_inc(a, b, x).unwrap();
        prop_assert!((back - p).abs() < 1e-10, "a={a} b={b} p={p} back={back}");
    }

    #[test]
    fn incomplete_beta_matches_statrs(a in 0.5f64..200.0, b in 0.5f64..200.0, x in 0.0f64..1.0) {
        let ours = beta_inc(a, b, x).unwrap();
        let theirs = Beta::new(a, b).unwrap().cdf(x);
        prop_assert!((ours - theirs).abs() < 1e-9, "a={a} b={b} x={x}: {ours} vs {theirs}");
    }

    #[test]
    fn intervals_hold_their_mass(n in 1u32..400, frac in 0.0f64..=1.0, level in 0.5f64..0.999) {
        let n = n as f64;
        let o = obs((frac * n).round(), n);
        let post = posterior(&o, &PriorSpec::uniform());
        let oracle = Beta::new(post.shape1, post.shape2).unwrap();
        for method in [IntervalMethod::Hpd, IntervalMethod::Central, IntervalMethod::EqualTailed] {
            let ci = interval(&o, level, &PriorSpec::uniform(), method).unwrap();
            let mass = oracle.cdf(ci.upper) - oracle.cdf(ci.lower);
            prop_assert!((mass - level).abs() < 1e-8, "{method:?} {o:?}: mass {mass}");
            prop_assert!(0.0 <= ci.lower && ci.lower <= ci.upper && ci.upper <= 1.0);
        }
    }

    #[test]
    fn shortest_is_no_wider(n in 1u32..1000, frac in 0.0f64..=1.0) {
        let n = n as f64;
        let o = obs((frac * n).round(), n);
        let h = hpd_interval(&o, 0.95, &PriorSpec::uniform()).unwrap();
        let e = equal_tailed_interval(&o, 0.95, &PriorSpec::uniform()).unwrap();
        prop_assert!(h.width() <= e.width() + 1e-9);
    }

    #[test]
    fn mirror_symmetry(n in 1u32..500, frac in 0.0f64..=1.0) {
        let n = n as f64;
        let k = (frac * n).round();
        for method in [IntervalMethod::Hpd, IntervalMethod::Central, IntervalMethod::ClopperPearson] {
            let a = interval(&obs(k, n), 0.95, &PriorSpec::uniform(), method).unwrap();
            let b = interval(&obs(n - k, n), 0.95, &PriorSpec::uniform(), method).unwrap();
            prop_assert!((a.lower - (1.0 - b.upper)).abs() < 1e-8, "{method:?} k={k} n={n}");
            prop_assert!((a.upper - (1.0 - b.lower)).abs() < 1e-8, "{method:?} k={k} n={n}");
        }
    }

    #[test]
    fn width_shrinks_with_n(p in 0.0f64..=1.0, n in 20u64..2000) {
        for method in [IntervalMethod::Hpd, IntervalMethod::Central] {
            prop_assert!(width(method, p, 4 * n) < width(method, p, n));
        }
    }

    #[test]
    fn extreme_proportions_are_narrowest(p in 0.02f64..0.98, n in 10u64..3000) {
        let plan = WidthPlan::default();
        let w = plan.interval_at(p, n).unwrap().width();
        prop_assert!(plan.interval_at(1.0, n).unwrap().width() < w);
        prop_assert!(plan.interval_at(0.0, n).unwrap().width() < w);
        prop_assert!(plan.interval_at(0.5, n).unwrap().width() >= w - 1e-9);
    }
}

#[test]
fn reference_intervals() {
    let ci = central_interval(&obs(90.0, 100.0), 0.95, &PriorSpec::uniform()).unwrap();
    assert!((ci.lower - 0.8254).abs() < 5e-4 && (ci.upper - 0.9444).abs() < 5e-4);
    let ci = central_interval(&obs(6.0, 6.0), 0.95, &PriorSpec::uniform()).unwrap();
    assert!((ci.lower - 0.6518).abs() < 5e-4 && ci.upper == 1.0);
    let ci = central_interval(&obs(0.5, 1.0), 0.95, &PriorSpec::uniform()).unwrap();
    assert!((ci.lower - 0.0608).abs() < 5e-4 && (ci.upper - 0.9392).abs() < 5e-4);
}

#[test]
fn reference_sample_sizes() {
    let plan = WidthPlan::default();
    assert_eq!(min_ntest_for_width(0.9, 0.10, &plan).unwrap(), 141);
    assert_eq!(min_ntest_for_width(0.89, 0.10, &plan).unwrap(), 153);
    assert_eq!(min_ntest_for_width(1.0, 0.05, &plan).unwrap(), 58);
}

#[test]
fn min_ntest_is_minimal() {
    for method in [IntervalMethod::Hpd, IntervalMethod::Central, IntervalMethod::ClopperPearson] {
        let plan = WidthPlan::default().with_method(method);
        for &(p, w) in &[(0.9, 0.1), (0.75, 0.2), (0.99, 0.05), (0.5, 0.3)] {
            let n = min_ntest_for_width(p, w, &plan).unwrap();
            assert!(plan.interval_at(p, n).unwrap().width() <= w);
            assert!(plan.interval_at(p, n - 1).unwrap().width() > w, "{method:?} {p} {w} {n}");
        }
    }
}

#[test]
fn cap_is_reported() {
    let plan = WidthPlan { cap: 50, ..WidthPlan::default() };
    assert!(matches!(min_ntest_for_width(0.5, 0.01, &plan), Err(Error::CapExceeded { cap: 50, .. })));
}

#[test]
fn clopper_pearson_exact_coverage() {
    use statrs::distribution::{Binomial, Discrete};
    for n in [1u64, 5, 17, 40] {
        let cis: Vec<_> = (0..=n).map(|k| clopper_pearson(&obs(k as f64, n as f64), 0.95).unwrap()).collect();
        for i in 0..=200 {
            let p = i as f64 / 200.0;
            let b = Binomial::new(p, n).unwrap();
            let cov: f64 = (0..=n).filter(|&k| cis[k as usize].contains(p)).map(|k| b.pmf(k)).sum();
            assert!(cov >= 0.95 - 1e-12, "n={n} p={p} coverage {cov}");
        }
    }
}

#[test]
fn method_names_parse() {
    for m in [IntervalMethod::Hpd, IntervalMethod::Central, IntervalMethod::EqualTailed, IntervalMethod::ClopperPearson]
    {
        assert_eq!(m.name().parse::<IntervalMethod>().unwrap(), m);
    }
    assert!("wald".parse::<IntervalMethod>().is_err());
}
