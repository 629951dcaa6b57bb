use crate::error::{Error, Result};
use crate::simgen::LabeledDataset;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Default ridge, relative to the average within-class variance.
pub const DEFAULT_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    /// Every class equally likely a priori.
    #[default]
    Equal,
    /// Class frequencies of the training data.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub ridge: f64,
    pub priors: PriorMode,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self { ridge: DEFAULT_RIDGE, priors: PriorMode::Equal }
    }
}

/// Linear discriminant analysis with a pooled within-class covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub(crate) classes: Vec<String>,
    /// K × d, one class mean per row.
    pub(crate) means: DMatrix<f64>,
    pub(crate) pooled_covariance: DMatrix<f64>,
    pub(crate) priors: Vec<f64>,
    /// K × d, rows `Σ⁻¹ μ_k`.
    pub(crate) weights: DMatrix<f64>,
    /// `-μ_kᵀ Σ⁻¹ μ_k / 2 + ln π_k`.
    pub(crate) offsets: DVector<f64>,
}

impl LdaModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn class_means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn pooled_covariance(&self) -> &DMatrix<f64> {
        &self.pooled_covariance
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Discriminant scores, n × K.
    pub fn scores(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: features.ncols() });
        }
        let mut s = features * self.weights.transpose();
        for mut row in s.row_iter_mut() {
            row += self.offsets.transpose();
        }
        Ok(s)
    }

    /// Most likely class per row. Ties go to the class declared first.
    pub fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.scores(features)?))
    }
}

pub(crate) fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn fit_lda(train: &LabeledDataset, config: &LdaConfig) -> Result<LdaModel> {
    let k = train.n_classes();
    let d = train.dim();
    if k < 2 {
        return Err(Error::domain("LDA needs at least two classes"));
    }
    if !(config.ridge >= 0.0) {
        return Err(Error::domain("ridge must be non-negative"));
    }
    let counts = train.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::domain(format!("class {:?} has no training samples", train.classes[c])));
    }
    let n = train.len();
    let mut means = DMatrix::zeros(k, d);
    for (i, &l) in train.labels.iter().enumerate() {
        let mut row = means.row_mut(l);
        row += train.features.row(i);
    }
    for (c, &count) in counts.iter().enumerate() {
        let mut row = means.row_mut(c);
        row /= count as f64;
    }
    let mut centered = train.features.clone();
    for (i, &l) in train.labels.iter().enumerate() {
        let mut row = centered.row_mut(i);
        row -= means.row(l);
    }
    let dof = n.saturating_sub(k).max(1) as f64;
    let mut cov = centered.transpose() * &centered / dof;
    let shrink = config.ridge * cov.trace() / d as f64;
    for j in 0..d {
        cov[(j, j)] += shrink;
    }
    let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
        Error::Singular(format!(" (pooled covariance of {n} samples in {d} dimensions; use ridge > 0)"))
    })?;
    if (0..d).any(|j| !(chol.l_dirty()[(j, j)] > 0.0)) {
        return Err(Error::Singular(String::new()));
    }
    let weights = chol.solve(&means.transpose()).transpose();
    let priors: Vec<f64> = match config.priors {
        PriorMode::Equal => vec![1.0 / k as f64; k],
        PriorMode::Empirical => counts.iter().map(|&c| c as f64 / n as f64).collect(),
    };
    let offsets = DVector::from_fn(k, |c, _| -0.5 * weights.row(c).dot(&means.row(c)) + priors[c].ln());
    Ok(LdaModel { classes: train.classes.clone(), means, pooled_covariance: cov, priors, weights, offsets })
}
