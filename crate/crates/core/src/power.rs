//! Power and sample size for comparing two independent proportions, e.g. the
//! sensitivities of an established and an improved classifier.
//!
//! The analytic routines use the normal approximation without continuity
//! correction (Fleiss, Tytun & Ury 1980).

use crate::error::{Error, Result};
use crate::optimize::golden_section;
use crate::rng::RngSeed;
use crate::special::{normal_cdf, normal_quantile};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Test sample size treated as infinite when bounding the achievable power.
pub const PRACTICAL_INFINITY: f64 = 1e5;
/// Lower end of the allocation-fraction search.
pub const MIN_FRACTION: f64 = 1e-5;
/// Replicates per independently seeded simulation chunk.
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoProportionSpec {
    pub p1: f64,
    pub p2: f64,
    pub n1: f64,
    pub n2: f64,
    /// Two-sided type I error.
    pub alpha: f64,
}

impl TwoProportionSpec {
    pub fn new(p1: f64, p2: f64, n1: f64, n2: f64, alpha: f64) -> Result<Self> {
        check_proportion(p1)?;
        check_proportion(p2)?;
        if !(n1 >= 1.0 && n2 >= 1.0) || !n1.is_finite() || !n2.is_finite() {
            return Err(Error::domain(format!("sample sizes must be >= 1, got ({n1}, {n2})")));
        }
        check_probability("alpha", alpha)?;
        Ok(Self { p1, p2, n1, n2, alpha })
    }
}

fn check_proportion(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("proportion {p} outside [0, 1]")))
    }
}

fn check_probability(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// Normal-approximation power of the two-sided test of `p1 = p2`.
pub fn analytic_power(spec: &TwoProportionSpec) -> Result<f64> {
    let &TwoProportionSpec { p1, p2, n1, n2, alpha } = spec;
    let (q1, q2) = (1.0 - p1, 1.0 - p2);
    let pbar = (n1 * p1 + n2 * p2) / (n1 + n2);
    let diff = (p1 - p2).abs();
    let z = normal_quantile(1.0 - alpha / 2.0);
    let s0 = z * ((1.0 / n1 + 1.0 / n2) * pbar * (1.0 - pbar)).sqrt();
    let s1 = (p1 * q1 / n1 + p2 * q2 / n2).sqrt();
    if s1 == 0.0 {
        return Err(Error::domain("both proportions are degenerate (0 or 1); power is undefined"));
    }
    Ok(1.0 - normal_cdf((s0 - diff) / s1) + normal_cdf((-s0 - diff) / s1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloPower {
    pub estimate: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub replicates: u64,
    pub seed: u64,
    /// Set when non-integer sample sizes were rounded for the draws.
    pub rounded: bool,
}

/// Whether the pooled-variance two-proportion z test rejects at `z_crit`.
pub fn z_test_rejects(k1: u64, n1: u64, k2: u64, n2: u64, z_crit: f64) -> bool {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let diff = (k1 as f64 / n1f - k2 as f64 / n2f).abs();
    let pooled = (k1 + k2) as f64 / (n1f + n2f);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    if se == 0.0 {
        diff > 0.0
    } else {
        diff / se > z_crit
    }
}

/// Monte Carlo power: the rejection rate of the z test over binomial draws.
///
/// Replicates are split into fixed-size chunks, each with its own RNG
/// substream, so the result depends only on `seed`, never on the number of
/// worker threads.
pub fn simulated_power(spec: &TwoProportionSpec, replicates: u64, seed: u64) -> Result<MonteCarloPower> {
    if replicates == 0 {
        return Err(Error::domain("at least one replicate is required"));
    }
    let n1 = spec.n1.round();
    let n2 = spec.n2.round();
    let rounded = n1 != spec.n1 || n2 != spec.n2;
    let (n1, n2) = (n1 as u64, n2 as u64);
    let b1 = Binomial::new(n1, spec.p1).map_err(|e| Error::domain(e.to_string()))?;
    let b2 = Binomial::new(n2, spec.p2).map_err(|e| Error::domain(e.to_string()))?;
    let z_crit = normal_quantile(1.0 - spec.alpha / 2.0);
    let root = RngSeed::new(seed);
    let chunks = replicates.div_ceil(CHUNK);
    let rejections: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = root.substream(chunk).rng();
            let count = CHUNK.min(replicates - chunk * CHUNK);
            (0..count)
                .filter(|_| {
                    let k1 = b1.sample(&mut rng);
                    let k2 = b2.sample(&mut rng);
                    z_test_rejects(k1, n1, k2, n2, z_crit)
                })
                .count() as u64
        })
        .sum();
    let estimate = rejections as f64 / replicates as f64;
    let half = 1.959_963_984_540_054 * (estimate * (1.0 - estimate) / replicates as f64).sqrt();
    Ok(MonteCarloPower {
        estimate,
        ci_lower: (estimate - half).max(0.0),
        ci_upper: (estimate + half).min(1.0),
        replicates,
        seed,
        rounded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizePlan {
    pub n1: f64,
    pub n2: f64,
    /// `n1 / (n1 + n2)`.
    pub fraction: f64,
    pub power: f64,
    pub alpha: f64,
}

impl SampleSizePlan {
    pub fn total(&self) -> f64 {
        self.n1 + self.n2
    }
}

fn check_design(p1: f64, p2: f64, alpha: f64, power: f64) -> Result<()> {
    check_proportion(p1)?;
    check_proportion(p2)?;
    check_probability("alpha", alpha)?;
    check_probability("power", power)?;
    if p1 == p2 {
        return Err(Error::Infeasible { what: format!("p1 = p2 = {p1}"), requested: power, max_power: alpha });
    }
    Ok(())
}

/// Per-group size for equal allocation, unrounded.
pub fn equal_allocation_samsize(p1: f64, p2: f64, alpha: f64, power: f64) -> Result<f64> {
    Ok(allocation_samsize(p1, p2, 0.5, alpha, power)?.n1)
}

/// Group sizes when a `fraction` of all test cases goes to group 1.
pub fn allocation_samsize(p1: f64, p2: f64, fraction: f64, alpha: f64, power: f64) -> Result<SampleSizePlan> {
    check_design(p1, p2, alpha, power)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::domain(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    let n1 = n1_for_fraction(p1, p2, fraction, alpha, power);
    let r = (1.0 - fraction) / fraction;
    Ok(SampleSizePlan { n1, n2: r * n1, fraction, power, alpha })
}

fn n1_for_fraction(p1: f64, p2: f64, fraction: f64, alpha: f64, power: f64) -> f64 {
    let r = (1.0 - fraction) / fraction;
    let pbar = (p1 + r * p2) / (r + 1.0);
    let z_alpha = normal_quantile(1.0 - alpha / 2.0);
    let z_beta = normal_quantile(power);
    let num =
        z_alpha * ((r + 1.0) * pbar * (1.0 - pbar)).sqrt() + z_beta * (r * p1 * (1.0 - p1) + p2 * (1.0 - p2)).sqrt();
    num * num / (r * (p1 - p2) * (p1 - p2))
}

/// Test cases needed for the new classifier when the old one was tested on
/// `n_old` cases.
///
/// Searches the allocation fraction in `[1e-5, 0.5]` whose group-1 size
/// matches `n_old`, then returns `ceil(n_old / f - n_old)`. When `n_old`
/// already exceeds the equal-allocation size the fraction is capped at 0.5.
pub fn n_new_for_fixed_n_old(p_old: f64, n_old: u64, p_new: f64, alpha: f64, power: f64) -> Result<u64> {
    check_design(p_old, p_new, alpha, power)?;
    if n_old == 0 {
        return Err(Error::domain("n_old must be positive"));
    }
    let target = n_old as f64;
    let n1 = |f: f64| n1_for_fraction(p_old, p_new, f, alpha, power);
    if n1(MIN_FRACTION) > target {
        return Err(Error::Infeasible {
            what: format!("p_old={p_old} tested on {n_old} cases vs p_new={p_new} at alpha={alpha}"),
            requested: power,
            max_power: max_power_vs_infinite_test(p_old, n_old, p_new, alpha)?,
        });
    }
    let best = golden_section(
        |f| {
            let d = n1(f) - target;
            Ok(d * d)
        },
        MIN_FRACTION,
        0.5,
        1e-13,
        500,
    )?;
    let n_new = target / best.x - target;
    // Round away float noise before taking the ceiling.
    Ok((n_new - 1e-9).ceil().max(1.0) as u64)
}

/// Analytic power against a new classifier tested on a practically
/// infinite number of cases.
pub fn max_power_vs_infinite_test(p_old: f64, n_old: u64, p_new: f64, alpha: f64) -> Result<f64> {
    analytic_power(&TwoProportionSpec::new(p_old, p_new, n_old as f64, PRACTICAL_INFINITY, alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p1: f64, p2: f64, n1: f64, n2: f64, alpha: f64) -> TwoProportionSpec {
        TwoProportionSpec::new(p1, p2, n1, n2, alpha).unwrap()
    }

    #[test]
    fn power_under_null_is_alpha() {
        for &(p, n1, n2) in &[(0.5, 10.0, 10.0), (0.8, 25.0, 1e5), (0.1, 3.0, 70.0)] {
            let pw = analytic_power(&spec(p, p, n1, n2, 0.05)).unwrap();
            assert!((pw - 0.05).abs() < 1e-12, "{pw}");
        }
    }

    #[test]
    fn analytic_examples() {
        let pw = analytic_power(&spec(0.75, 0.9, 25.0, 1e5, 0.05)).unwrap();
        assert!((pw - 0.647).abs() < 1e-3, "{pw}");
        let pw = analytic_power(&spec(0.75, 0.9, 100.0, 100.0, 0.05)).unwrap();
        assert!((pw - 0.80).abs() < 5e-3, "{pw}");
        assert!(analytic_power(&spec(1.0, 1.0, 5.0, 5.0, 0.05)).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(TwoProportionSpec::new(1.1, 0.5, 5.0, 5.0, 0.05).is_err());
        assert!(TwoProportionSpec::new(0.5, 0.5, 0.5, 5.0, 0.05).is_err());
        assert!(TwoProportionSpec::new(0.5, 0.5, 5.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn equal_allocation_examples() {
        let n = equal_allocation_samsize(0.75, 0.9, 0.05, 0.8).unwrap();
        assert!((n - 99.54).abs() < 0.01, "{n}");
        let n = equal_allocation_samsize(0.5, 1.0, 0.05, 0.8).unwrap();
        assert!((n - 10.51).abs() < 0.01, "{n}");
        let a = equal_allocation_samsize(0.1, 0.9, 0.05, 0.8).unwrap();
        let b = equal_allocation_samsize(0.9, 0.1, 0.05, 0.8).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!(matches!(equal_allocation_samsize(0.7, 0.7, 0.05, 0.8), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn allocation_relabeling_symmetry() {
        for &f in &[0.1, 0.3, 0.5, 0.8] {
            let a = allocation_samsize(0.75, 0.9, f, 0.05, 0.8).unwrap();
            let b = allocation_samsize(0.9, 0.75, 1.0 - f, 0.05, 0.8).unwrap();
            assert!((a.total() - b.total()).abs() < 1e-8 * a.total());
            assert!((a.fraction - a.n1 / a.total()).abs() < 1e-9);
        }
        assert!(allocation_samsize(0.75, 0.9, 1.0, 0.05, 0.8).is_err());
    }

    #[test]
    fn n_new_examples() {
        assert_eq!(n_new_for_fixed_n_old(0.75, 25, 0.975, 0.1, 0.9).unwrap(), 63);
        assert_eq!(n_new_for_fixed_n_old(0.75, 25, 0.96, 0.1, 0.9).unwrap(), 117);
        let n = n_new_for_fixed_n_old(0.75, 25, 0.99, 0.05, 0.95).unwrap();
        assert!((110..=122).contains(&n), "{n}");
        // the plan with fraction 25 / (25 + n) reaches n1 ≈ 25
        let f = 25.0 / (25.0 + 63.0);
        let plan = allocation_samsize(0.75, 0.975, f, 0.1, 0.9).unwrap();
        assert!(plan.n1 <= 25.0 + 1e-9);
    }

    #[test]
    fn n_new_infeasible_reports_max_power() {
        match n_new_for_fixed_n_old(0.75, 25, 0.9, 0.05, 0.8) {
            Err(Error::Infeasible { max_power, .. }) => assert!((max_power - 0.647).abs() < 1e-3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn n_new_with_large_n_old_caps_fraction() {
        assert_eq!(n_new_for_fixed_n_old(0.75, 500, 0.9, 0.05, 0.8).unwrap(), 500);
    }

    #[test]
    fn max_power_examples() {
        let pw = max_power_vs_infinite_test(0.75, 25, 0.9, 0.05).unwrap();
        assert!((pw - 0.65).abs() < 0.005);
        assert!((max_power_vs_infinite_test(0.6, 25, 0.6, 0.05).unwrap() - 0.05).abs() < 1e-12);
        let pw = max_power_vs_infinite_test(0.75, 25, 0.975, 0.05).unwrap();
        assert!((pw - 0.97).abs() < 0.005, "{pw}");
    }

    #[test]
    fn simulation_is_deterministic_and_flags_rounding() {
        let s = spec(0.6, 0.8, 30.4, 40.0, 0.05);
        let a = simulated_power(&s, 5000, 7).unwrap();
        let b = simulated_power(&s, 5000, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.rounded);
        assert!(a.ci_lower <= a.estimate && a.estimate <= a.ci_upper);
        let c = simulated_power(&s, 5000, 8).unwrap();
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn z_test_degenerate_denominator() {
        assert!(!z_test_rejects(0, 10, 0, 20, 1.96));
        assert!(!z_test_rejects(10, 10, 20, 20, 1.96));
        assert!(z_test_rejects(10, 10, 0, 20, 1.96));
    }
}
