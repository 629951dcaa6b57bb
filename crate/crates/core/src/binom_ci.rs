//! Beta-posterior intervals for tested proportions and the test sample sizes
//! needed to reach a prescribed interval width.
//!
//! Testing a classifier on `n` cases of a class is modelled as a Bernoulli
//! process with `k` successes. The success count may be real valued so that
//! pooled fractions (e.g. per patient) can be used with the number of
//! independent units as `n`.

use crate::error::{Error, Result};
use crate::optimize::golden_section;
use crate::special::{beta_inc, beta_quantile};
use serde::{Deserialize, Serialize};

/// Tolerance on the lower-tail mass of the HPD search.
const HPD_TOL: f64 = 1e-10;
const HPD_MAX_ITER: usize = 200;
/// Default upper limit for sample-size scans.
pub const DEFAULT_NTEST_CAP: u64 = 1_000_000;

/// Observed successes out of a test sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialObservation {
    successes: f64,
    trials: f64,
}

impl BinomialObservation {
    pub fn new(successes: f64, trials: f64) -> Result<Self> {
        if !(trials > 0.0) || !trials.is_finite() {
            return Err(Error::domain(format!("test sample size must be positive, got {trials}")));
        }
        if !(0.0..=trials).contains(&successes) {
            return Err(Error::domain(format!("successes {successes} outside [0, {trials}]")));
        }
        Ok(Self { successes, trials })
    }

    pub fn successes(&self) -> f64 {
        self.successes
    }

    pub fn trials(&self) -> f64 {
        self.trials
    }

    /// Observed proportion `k / n`.
    pub fn point_estimate(&self) -> f64 {
        self.successes / self.trials
    }
}

pub fn point_estimate(obs: &BinomialObservation) -> f64 {
    obs.point_estimate()
}

/// Standard deviation `sqrt(p (1 - p) / n)` of an observed proportion.
pub fn sampling_stddev(p: f64, n: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(n > 0.0) {
        return Err(Error::domain(format!("need 0 <= p <= 1 and n > 0, got p={p}, n={n}")));
    }
    Ok((p * (1.0 - p) / n).sqrt())
}

/// Beta prior on the success probability. The default is uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub a: f64,
    pub b: f64,
}

impl PriorSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::domain(format!("prior shapes must be positive, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn uniform() -> Self {
        Self { a: 1.0, b: 1.0 }
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self::uniform()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub shape1: f64,
    pub shape2: f64,
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.shape1 / (self.shape1 + self.shape2)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        beta_inc(self.shape1, self.shape2, x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        beta_quantile(p, self.shape1, self.shape2)
    }

    /// Probability mass between `lower` and `upper`.
    pub fn mass(&self, lower: f64, upper: f64) -> Result<f64> {
        Ok(self.cdf(upper)? - self.cdf(lower)?)
    }
}

/// Posterior Beta(k + a, n - k + b).
pub fn posterior(obs: &BinomialObservation, prior: &PriorSpec) -> BetaParams {
    BetaParams { shape1: obs.successes + prior.a, shape2: obs.trials - obs.successes + prior.b }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    /// Shortest interval holding the requested posterior mass.
    Hpd,
    /// Equal posterior tails, except one-sided when no failures or no
    /// successes were observed. For 90/100 under a flat prior this gives
    /// [0.8254, 0.9444].
    Central,
    /// Posterior quantiles at `(1 - level) / 2` and `(1 + level) / 2`.
    EqualTailed,
    /// Exact binomial tail inversion (frequentist, integer counts only).
    ClopperPearson,
}

impl IntervalMethod {
    pub fn name(&self) -> &'static str {
        match self {
            IntervalMethod::Hpd => "hpd",
            IntervalMethod::Central => "central",
            IntervalMethod::EqualTailed => "equal-tailed",
            IntervalMethod::ClopperPearson => "clopper-pearson",
        }
    }
}

impl std::str::FromStr for IntervalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hpd" => Ok(IntervalMethod::Hpd),
            "central" | "bayes" => Ok(IntervalMethod::Central),
            "equal-tailed" => Ok(IntervalMethod::EqualTailed),
            "clopper-pearson" => Ok(IntervalMethod::ClopperPearson),
            other => Err(Error::domain(format!("unknown interval method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: IntervalMethod,
}

impl CredibleInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {level}")))
    }
}

fn lower_sided(post: &BetaParams, level: f64, method: IntervalMethod) -> Result<CredibleInterval> {
    Ok(CredibleInterval { lower: 0.0, upper: post.quantile(level)?, level, method })
}

fn upper_sided(post: &BetaParams, level: f64, method: IntervalMethod) -> Result<CredibleInterval> {
    Ok(CredibleInterval { lower: post.quantile(1.0 - level)?, upper: 1.0, level, method })
}

/// Highest posterior density interval.
///
/// For a unimodal posterior the candidate intervals `[Q(t), Q(t + level)]`
/// are searched over the lower-tail mass `t` for minimal width. Monotone
/// densities give one-sided intervals. A U-shaped posterior (both shapes
/// below one) has a disconnected HPD region; the shorter one-sided interval
/// is returned instead.
pub fn hpd_interval(obs: &BinomialObservation, level: f64, prior: &PriorSpec) -> Result<CredibleInterval> {
    check_level(level)?;
    let post = posterior(obs, prior);
    let (a, b) = (post.shape1, post.shape2);
    let method = IntervalMethod::Hpd;
    if a == 1.0 && b == 1.0 {
        let half = (1.0 - level) / 2.0;
        return Ok(CredibleInterval { lower: half, upper: 1.0 - half, level, method });
    }
    if a <= 1.0 && b >= 1.0 {
        return lower_sided(&post, level, method);
    }
    if a >= 1.0 && b <= 1.0 {
        return upper_sided(&post, level, method);
    }
    if a < 1.0 && b < 1.0 {
        let left = lower_sided(&post, level, method)?;
        let right = upper_sided(&post, level, method)?;
        return Ok(if left.width() <= right.width() { left } else { right });
    }
    let width = |t: f64| -> Result<f64> {
        let upper_mass = (t + level).min(1.0);
        Ok(post.quantile(upper_mass)? - post.quantile(t)?)
    };
    let best = golden_section(width, 0.0, 1.0 - level, HPD_TOL, HPD_MAX_ITER)?;
    let t = best.x;
    Ok(CredibleInterval { lower: post.quantile(t)?, upper: post.quantile((t + level).min(1.0))?, level, method })
}

/// Posterior quantiles at `(1 - level) / 2` and `1 - (1 - level) / 2`.
pub fn equal_tailed_interval(obs: &BinomialObservation, level: f64, prior: &PriorSpec) -> Result<CredibleInterval> {
    check_level(level)?;
    let post = posterior(obs, prior);
    let tail = (1.0 - level) / 2.0;
    Ok(CredibleInterval {
        lower: post.quantile(tail)?,
        upper: post.quantile(1.0 - tail)?,
        level,
        method: IntervalMethod::EqualTailed,
    })
}

/// Equal-tailed interval that turns one-sided at `k = 0` and `k = n`.
pub fn central_interval(obs: &BinomialObservation, level: f64, prior: &PriorSpec) -> Result<CredibleInterval> {
    check_level(level)?;
    let post = posterior(obs, prior);
    let method = IntervalMethod::Central;
    if obs.successes == 0.0 {
        return lower_sided(&post, level, method);
    }
    if obs.successes == obs.trials {
        return upper_sided(&post, level, method);
    }
    let tail = (1.0 - level) / 2.0;
    Ok(CredibleInterval { lower: post.quantile(tail)?, upper: post.quantile(1.0 - tail)?, level, method })
}

/// Clopper–Pearson interval; requires an integer success count.
pub fn clopper_pearson(obs: &BinomialObservation, level: f64) -> Result<CredibleInterval> {
    check_level(level)?;
    let (k, n) = (obs.successes, obs.trials);
    if k.fract() != 0.0 || n.fract() != 0.0 {
        return Err(Error::domain(format!("Clopper-Pearson needs integer counts, got k={k}, n={n}")));
    }
    let tail = (1.0 - level) / 2.0;
    let lower = if k == 0.0 { 0.0 } else { beta_quantile(tail, k, n - k + 1.0)? };
    let upper = if k == n { 1.0 } else { beta_quantile(1.0 - tail, k + 1.0, n - k)? };
    Ok(CredibleInterval { lower, upper, level, method: IntervalMethod::ClopperPearson })
}

/// Dispatch on `method`. The prior is ignored by Clopper–Pearson.
pub fn interval(
    obs: &BinomialObservation,
    level: f64,
    prior: &PriorSpec,
    method: IntervalMethod,
) -> Result<CredibleInterval> {
    match method {
        IntervalMethod::Hpd => hpd_interval(obs, level, prior),
        IntervalMethod::Central => central_interval(obs, level, prior),
        IntervalMethod::EqualTailed => equal_tailed_interval(obs, level, prior),
        IntervalMethod::ClopperPearson => clopper_pearson(obs, level),
    }
}

/// Settings for the test-sample-size scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthPlan {
    pub level: f64,
    pub prior: PriorSpec,
    pub method: IntervalMethod,
    pub cap: u64,
}

impl Default for WidthPlan {
    fn default() -> Self {
        Self { level: 0.95, prior: PriorSpec::uniform(), method: IntervalMethod::Central, cap: DEFAULT_NTEST_CAP }
    }
}

impl WidthPlan {
    pub fn with_method(mut self, method: IntervalMethod) -> Self {
        self.method = method;
        self
    }

    /// Interval for the expected proportion at test size `n`, with `k = p̂ n`
    /// kept real valued (rounded for Clopper-Pearson, which needs counts).
    pub fn interval_at(&self, p_hat: f64, n: u64) -> Result<CredibleInterval> {
        let n = n as f64;
        let mut k = (p_hat * n).clamp(0.0, n);
        if self.method == IntervalMethod::ClopperPearson {
            k = k.round();
        }
        interval(&BinomialObservation::new(k, n)?, self.level, &self.prior, self.method)
    }
}

/// Smallest test sample size whose interval for `expected_p_hat` is at most
/// `max_width` wide.
///
/// Widths are not strictly monotone at tiny `n` with real `k`, so the sizes
/// are scanned upwards from one.
pub fn min_ntest_for_width(expected_p_hat: f64, max_width: f64, plan: &WidthPlan) -> Result<u64> {
    if !(0.0..=1.0).contains(&expected_p_hat) {
        return Err(Error::domain(format!("expected proportion {expected_p_hat} outside [0, 1]")));
    }
    if !(max_width > 0.0 && max_width <= 1.0) {
        return Err(Error::domain(format!("maximal width must lie in (0, 1], got {max_width}")));
    }
    for n in 1..=plan.cap {
        if plan.interval_at(expected_p_hat, n)?.width() <= max_width {
            return Ok(n);
        }
    }
    Err(Error::CapExceeded { cap: plan.cap, max_width })
}

/// Conservative sample size, planned for the widest case `p̂ = 0.5`.
pub fn worst_case_ntest(max_width: f64, plan: &WidthPlan) -> Result<u64> {
    min_ntest_for_width(0.5, max_width, plan)
}
