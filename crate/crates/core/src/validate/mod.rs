//! Iterated cross-validation and learning curves.
//!
//! Three views of the same question (how good is a model trained on `n`
//! cases per class?) are produced:
//!
//! * `population`: many independent training sets per size, each model
//!   tested on a large independent test set;
//! * `growing_truth`: the cross-validation surrogates of one growing
//!   dataset, tested on the large test set;
//! * `growing_cv`: the same surrogates, tested on their held-out folds.

mod curves;
mod stats;

pub use curves::{
    learning_curve_growing, learning_curve_population, retrospective_curve, write_tidy_csv, CurvePoint, LearningCurve,
    View,
};
pub use stats::{fit_inverse_power_law, percentile_band, Band, PowerLawFit};

use crate::classify::ModelConfig;
use crate::confusion::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::simgen::LabeledDataset;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub k: usize,
    pub iterations: usize,
    pub seed: RngSeed,
    pub stratified: bool,
}

impl CvSpec {
    pub fn new(k: usize, iterations: usize, seed: u64) -> Result<Self> {
        let spec = Self { k, iterations, seed: RngSeed::new(seed), stratified: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::domain(format!("need at least 2 folds, got {}", self.k)));
        }
        if self.iterations == 0 {
            return Err(Error::domain("need at least one iteration"));
        }
        Ok(())
    }

    /// Same settings with a different stream.
    pub fn with_seed(mut self, seed: RngSeed) -> Self {
        self.seed = seed;
        self
    }
}

impl Default for CvSpec {
    fn default() -> Self {
        Self { k: 5, iterations: 100, seed: RngSeed::new(0), stratified: true }
    }
}

/// Fold number for every sample.
///
/// Stratified: each class is shuffled and dealt round-robin, continuing where
/// the previous class stopped, so per-class and total fold sizes both differ
/// by at most one.
pub fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    stratified: bool,
    seed: RngSeed,
) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::domain("need at least 2 folds"));
    }
    if k > labels.len() {
        return Err(Error::domain(format!("{k} folds for {} samples", labels.len())));
    }
    let mut rng = seed.rng();
    let mut folds = vec![0; labels.len()];
    if stratified {
        let mut next = 0;
        for c in 0..n_classes {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            idx.shuffle(&mut rng);
            for i in idx {
                folds[i] = next % k;
                next += 1;
            }
        }
    } else {
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            folds[i] = j % k;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// Held-out predictions of all surrogates, one matrix per iteration.
    pub held_out: Vec<ConfusionMatrix>,
    /// Per iteration and fold: the surrogate tested on the external set.
    pub external: Option<Vec<Vec<ConfusionMatrix>>>,
    /// Training samples of every surrogate, per iteration and fold.
    pub train_sizes: Vec<Vec<usize>>,
    /// `(k - 1) / k` of the dataset size.
    pub effective_train_size: f64,
}

impl CvResult {
    /// External-test matrices pooled over the surrogates of each iteration.
    pub fn external_pooled(&self) -> Option<Result<Vec<ConfusionMatrix>>> {
        self.external.as_ref().map(|iters| {
            iters
                .iter()
                .map(|folds| {
                    let mut pooled = folds[0].clone();
                    for cm in &folds[1..] {
                        pooled.merge(cm)?;
                    }
                    Ok(pooled)
                })
                .collect()
        })
    }
}

fn confusion_of(classes: &[String], truth: &[usize], predicted: &[usize]) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(classes.iter().cloned())?.with_stratified(true);
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.accumulate_index(t, p, 1.0)?;
    }
    Ok(cm)
}

/// Train `model` on `train` and tabulate its predictions for `test`.
pub fn evaluate(model: &ModelConfig, train: &LabeledDataset, test: &LabeledDataset) -> Result<ConfusionMatrix> {
    let fitted = model.fit(train)?;
    confusion_of(&test.classes, &test.labels, &fitted.predict(&test.features)?)
}

/// Per-class sensitivities of a confusion matrix.
pub fn sensitivities(cm: &ConfusionMatrix) -> Result<Vec<f64>> {
    (0..cm.n_classes()).map(|c| cm.sensitivity(c)).collect()
}

/// `cv.iterations` rounds of `cv.k`-fold cross-validation.
///
/// Each iteration draws a fresh fold assignment from its own substream and
/// runs in parallel; the result does not depend on the thread count.
pub fn iterated_cv(
    data: &LabeledDataset,
    model: &ModelConfig,
    cv: &CvSpec,
    external_test: Option<&LabeledDataset>,
) -> Result<CvResult> {
    cv.validate()?;
    if let Some(ext) = external_test {
        if ext.dim() != data.dim() || ext.classes != data.classes {
            return Err(Error::domain("external test set must share classes and dimension with the data"));
        }
    }
    let per_iteration: Vec<(ConfusionMatrix, Option<Vec<ConfusionMatrix>>, Vec<usize>)> = (0..cv.iterations)
        .into_par_iter()
        .map(|it| {
            let folds =
                stratified_folds(&data.labels, data.n_classes(), cv.k, cv.stratified, cv.seed.substream(it as u64))?;
            let mut held_out = ConfusionMatrix::new(data.classes.iter().cloned())?.with_stratified(true);
            let mut external = external_test.map(|_| Vec::with_capacity(cv.k));
            let mut sizes = Vec::with_capacity(cv.k);
            for f in 0..cv.k {
                let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| folds[i] == f);
                let train = data.subset(&train_idx);
                if let Some(c) = train.class_counts().iter().position(|&n| n == 0) {
                    return Err(Error::MissingClassInFold { class: data.classes[c].clone(), iteration: it, fold: f });
                }
                let fitted = model.fit(&train)?;
                sizes.push(train.len());
                if !test_idx.is_empty() {
                    let test = data.subset(&test_idx);
                    for (&t, &p) in test.labels.iter().zip(&fitted.predict(&test.features)?) {
                        held_out.accumulate_index(t, p, 1.0)?;
                    }
                }
                if let (Some(ext), Some(out)) = (external_test, external.as_mut()) {
                    out.push(confusion_of(&ext.classes, &ext.labels, &fitted.predict(&ext.features)?)?);
                }
            }
            Ok((held_out, external, sizes))
        })
        .collect::<Result<_>>()?;
    let mut result = CvResult {
        held_out: Vec::with_capacity(cv.iterations),
        external: external_test.map(|_| Vec::with_capacity(cv.iterations)),
        train_sizes: Vec::with_capacity(cv.iterations),
        effective_train_size: (cv.k - 1) as f64 / cv.k as f64 * data.len() as f64,
    };
    for (h, e, s) in per_iteration {
        result.held_out.push(h);
        if let (Some(all), Some(e)) = (result.external.as_mut(), e) {
            all.push(e);
        }
        result.train_sizes.push(s);
    }
    Ok(result)
}
