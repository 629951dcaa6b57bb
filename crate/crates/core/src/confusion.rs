//! Confusion matrices and the characteristic fractions derived from them.
//!
//! Rows are reference classes, columns predicted classes. Counts are real
//! valued so that averaged or weighted tables are first class.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<f64>,
    /// Rows were sampled per class rather than at population prevalence.
    stratified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub classes: Vec<String>,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    /// `None` when the predictive value cannot be computed.
    pub ppv: Vec<Option<f64>>,
    pub npv: Vec<Option<f64>>,
    pub support: Vec<f64>,
    pub overall_accuracy: f64,
}

impl ConfusionMatrix {
    pub fn new<S: Into<String>>(classes: impl IntoIterator<Item = S>) -> Result<Self> {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        if classes.is_empty() {
            return Err(Error::domain("a confusion matrix needs at least one class"));
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return Err(Error::domain(format!("duplicate class label {c:?}")));
            }
        }
        let k = classes.len();
        Ok(Self { classes, counts: vec![0.0; k * k], stratified: false })
    }

    /// Build from a square table of counts, rows = reference classes.
    pub fn from_counts<S: Into<String>>(classes: impl IntoIterator<Item = S>, rows: &[Vec<f64>]) -> Result<Self> {
        let mut cm = Self::new(classes)?;
        let k = cm.classes.len();
        if rows.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: rows.len() });
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, found: row.len() });
            }
            for (p, &v) in row.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::domain(format!("count {v} must be finite and >= 0")));
                }
                cm.counts[r * k + p] = v;
            }
        }
        Ok(cm)
    }

    /// Mark rows as class-stratified (not prevalence representative).
    pub fn with_stratified(mut self, stratified: bool) -> Self {
        self.stratified = stratified;
        self
    }

    pub fn is_stratified(&self) -> bool {
        self.stratified
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.classes.iter().position(|c| c == label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn get(&self, reference: usize, predicted: usize) -> f64 {
        self.counts[reference * self.n_classes() + predicted]
    }

    pub fn accumulate(&mut self, reference: &str, predicted: &str, weight: f64) -> Result<()> {
        let r = self.index_of(reference)?;
        let p = self.index_of(predicted)?;
        self.accumulate_index(r, p, weight)
    }

    pub fn accumulate_index(&mut self, reference: usize, predicted: usize, weight: f64) -> Result<()> {
        let k = self.n_classes();
        if reference >= k || predicted >= k {
            return Err(Error::UnknownLabel(format!("index {}", reference.max(predicted))));
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::domain(format!("weight must be positive, got {weight}")));
        }
        self.counts[reference * k + predicted] += weight;
        Ok(())
    }

    /// Element-wise sum, for merging matrices from independent jobs.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::domain("cannot merge confusion matrices over different classes"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Multiply every count by `factor`, e.g. to average merged matrices.
    pub fn scaled(&self, factor: f64) -> ConfusionMatrix {
        let mut out = self.clone();
        out.counts.iter_mut().for_each(|c| *c *= factor);
        out
    }

    pub fn row_sum(&self, reference: usize) -> f64 {
        let k = self.n_classes();
        self.counts[reference * k..(reference + 1) * k].iter().sum()
    }

    pub fn col_sum(&self, predicted: usize) -> f64 {
        (0..self.n_classes()).map(|r| self.get(r, predicted)).sum()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn overall_accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::UndefinedMetric("accuracy of an empty matrix".into()));
        }
        Ok((0..self.n_classes()).map(|c| self.get(c, c)).sum::<f64>() / total)
    }

    pub fn sensitivity(&self, class: usize) -> Result<f64> {
        let support = self.row_sum(class);
        if support <= 0.0 {
            return Err(Error::UndefinedMetric(format!("sensitivity of {:?} without test cases", self.classes[class])));
        }
        Ok(self.get(class, class) / support)
    }

    pub fn specificity(&self, class: usize) -> Result<f64> {
        let k = self.n_classes();
        let (mut hits, mut total) = (0.0, 0.0);
        for r in (0..k).filter(|&r| r != class) {
            for p in 0..k {
                let v = self.get(r, p);
                total += v;
                if p != class {
                    hits += v;
                }
            }
        }
        if total <= 0.0 {
            return Err(Error::UndefinedMetric(format!(
                "specificity of {:?} without cases of other classes",
                self.classes[class]
            )));
        }
        Ok(hits / total)
    }

    /// Per-row weights: raw counts for representative data, otherwise rows
    /// rescaled to the given prevalences.
    fn row_weights(&self, prevalence: Option<&[f64]>) -> Result<Vec<f64>> {
        let k = self.n_classes();
        match prevalence {
            None if self.stratified => Err(Error::PrevalenceRequired),
            None => Ok(vec![1.0; k]),
            Some(prev) => {
                if prev.len() != k {
                    return Err(Error::DimensionMismatch { expected: k, found: prev.len() });
                }
                if prev.iter().any(|&p| !(p >= 0.0)) {
                    return Err(Error::domain("prevalences must be non-negative"));
                }
                (0..k)
                    .map(|r| {
                        let s = self.row_sum(r);
                        if s > 0.0 {
                            Ok(prev[r] / s)
                        } else if prev[r] == 0.0 {
                            Ok(0.0)
                        } else {
                            Err(Error::UndefinedMetric(format!(
                                "class {:?} has prevalence but no test cases",
                                self.classes[r]
                            )))
                        }
                    })
                    .collect()
            }
        }
    }

    /// Positive predictive value. Stratified matrices need `prevalence`.
    pub fn ppv(&self, class: usize, prevalence: Option<&[f64]>) -> Result<f64> {
        let w = self.row_weights(prevalence)?;
        let col: f64 = (0..self.n_classes()).map(|r| w[r] * self.get(r, class)).sum();
        if col <= 0.0 {
            return Err(Error::UndefinedMetric(format!("PPV of {:?}: class never predicted", self.classes[class])));
        }
        Ok(w[class] * self.get(class, class) / col)
    }

    /// Negative predictive value. Stratified matrices need `prevalence`.
    pub fn npv(&self, class: usize, prevalence: Option<&[f64]>) -> Result<f64> {
        let w = self.row_weights(prevalence)?;
        let k = self.n_classes();
        let (mut hits, mut total) = (0.0, 0.0);
        for (r, &wr) in w.iter().enumerate() {
            for p in (0..k).filter(|&p| p != class) {
                let v = wr * self.get(r, p);
                total += v;
                if r != class {
                    hits += v;
                }
            }
        }
        if total <= 0.0 {
            return Err(Error::UndefinedMetric(format!("NPV of {:?}: no negative predictions", self.classes[class])));
        }
        Ok(hits / total)
    }

    /// Divide every row by its sum; the diagonal then holds the sensitivities.
    pub fn row_normalize(&self) -> Result<ConfusionMatrix> {
        let k = self.n_classes();
        let mut out = self.clone();
        for r in 0..k {
            let s = self.row_sum(r);
            if s <= 0.0 {
                return Err(Error::UndefinedMetric(format!("cannot normalize empty row {:?}", self.classes[r])));
            }
            for p in 0..k {
                out.counts[r * k + p] /= s;
            }
        }
        out.stratified = true;
        Ok(out)
    }

    /// All metrics per class. Predictive values are `None` when undefined.
    pub fn metrics(&self, prevalence: Option<&[f64]>) -> Result<ClassMetrics> {
        let k = self.n_classes();
        let mut m = ClassMetrics {
            classes: self.classes.clone(),
            sensitivity: Vec::with_capacity(k),
            specificity: Vec::with_capacity(k),
            ppv: Vec::with_capacity(k),
            npv: Vec::with_capacity(k),
            support: Vec::with_capacity(k),
            overall_accuracy: self.overall_accuracy()?,
        };
        for c in 0..k {
            m.sensitivity.push(self.sensitivity(c)?);
            m.specificity.push(self.specificity(c)?);
            m.ppv.push(self.ppv(c, prevalence).ok());
            m.npv.push(self.npv(c, prevalence).ok());
            m.support.push(self.row_sum(c));
        }
        Ok(m)
    }

    /// Reorder classes; `order[i]` is the old index of new class `i`.
    pub fn permuted(&self, order: &[usize]) -> Result<ConfusionMatrix> {
        let k = self.n_classes();
        let mut seen = vec![false; k];
        if order.len() != k || order.iter().any(|&i| i >= k || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::domain("order must be a permutation of the class indices"));
        }
        let mut out = self.clone();
        out.classes = order.iter().map(|&i| self.classes[i].clone()).collect();
        for (r, &or) in order.iter().enumerate() {
            for (p, &op) in order.iter().enumerate() {
                out.counts[r * k + p] = self.get(or, op);
            }
        }
        Ok(out)
    }

    /// CSV with the class labels as header row and first column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["reference".to_string()];
        header.extend(self.classes.iter().cloned());
        w.write_record(&header)?;
        for (r, class) in self.classes.iter().enumerate() {
            let mut rec = vec![class.clone()];
            rec.extend((0..self.n_classes()).map(|p| self.get(r, p).to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<ConfusionMatrix> {
        let mut rdr = csv::Reader::from_reader(reader);
        let classes: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let label = rec.get(0).unwrap_or_default();
            if classes.get(i).map(String::as_str) != Some(label) {
                return Err(Error::Format(format!(
                    "row {} is labelled {label:?}; rows must follow the header order",
                    i + 2
                )));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Format(format!("row {}: {e}", i + 2))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        ConfusionMatrix::from_counts(classes, &rows)
    }
}

/// Expected metrics of a feature-blind classifier that predicts each class
/// with probability equal to its prevalence.
pub fn guessing_baseline<S: AsRef<str>>(classes: &[S], class_sizes: &[f64]) -> Result<ClassMetrics> {
    if classes.len() != class_sizes.len() {
        return Err(Error::DimensionMismatch { expected: classes.len(), found: class_sizes.len() });
    }
    if class_sizes.is_empty() || class_sizes.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::domain("class sizes must be positive"));
    }
    let total: f64 = class_sizes.iter().sum();
    let prev: Vec<f64> = class_sizes.iter().map(|s| s / total).collect();
    Ok(ClassMetrics {
        classes: classes.iter().map(|c| c.as_ref().to_string()).collect(),
        sensitivity: prev.clone(),
        specificity: prev.iter().map(|p| 1.0 - p).collect(),
        ppv: prev.iter().map(|&p| Some(p)).collect(),
        npv: prev.iter().map(|&p| Some(1.0 - p)).collect(),
        support: class_sizes.to_vec(),
        overall_accuracy: prev.iter().map(|p| p * p).sum(),
    })
}
