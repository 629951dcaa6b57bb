//! Sample-size planning for classifier validation.
//!
//! Binomial credible intervals and test-set sizing, two-proportion power and
//! sample size, confusion-matrix metrics, Gaussian class simulation, a
//! PLS-LDA classifier, and learning curves from iterated cross-validation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod binio;
pub mod binom_ci;
pub mod classify;
pub mod confusion;
pub mod error;
pub mod optimize;
pub mod power;
pub mod rng;
pub mod scenario;
pub mod simgen;
pub mod special;
pub mod validate;

pub use binom_ci::{
    central_interval, clopper_pearson, equal_tailed_interval, hpd_interval, interval, min_ntest_for_width, posterior,
    worst_case_ntest, BetaParams, BinomialObservation, CredibleInterval, IntervalMethod, PriorSpec, WidthPlan,
};
pub use classify::{fit_lda, fit_pls_lda, LdaConfig, LdaModel, Model, ModelConfig, PipelineModel, PriorMode};
pub use confusion::{guessing_baseline, ClassMetrics, ConfusionMatrix};
pub use error::{Error, Result};
pub use power::{
    allocation_samsize, analytic_power, equal_allocation_samsize, max_power_vs_infinite_test, n_new_for_fixed_n_old,
    simulated_power, MonteCarloPower, SampleSizePlan, TwoProportionSpec,
};
pub use rng::RngSeed;
pub use scenario::{ProblemSpec, Scenario, ScenarioResult, ViewKind};
pub use simgen::{
    growing_sequence, make_problem, mimic_problem, sample_mvn, stratified_draw, GaussianClassSpec, GrowthSource,
    LabeledDataset, Population, Provenance,
};
pub use validate::{iterated_cv, CvResult, CvSpec, LearningCurve, View};
