use super::stats::{percentile_band, Band};
use super::{evaluate, iterated_cv, sensitivities, CvSpec};
use crate::classify::ModelConfig;
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::simgen::{growing_sequence, stratified_draw, GrowthSource, LabeledDataset, Population};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const LOWER_PERCENTILE: f64 = 5.0;
pub const UPPER_PERCENTILE: f64 = 95.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Population,
    GrowingTruth,
    GrowingCv,
    Retrospective,
}

impl View {
    pub fn name(&self) -> &'static str {
        match self {
            View::Population => "population",
            View::GrowingTruth => "growing_truth",
            View::GrowingCv => "growing_cv",
            View::Retrospective => "retrospective",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    /// Cases per class the models were actually trained on.
    pub train_size_per_class: f64,
    /// Cases per class in the dataset the point was computed from.
    pub dataset_size_per_class: usize,
    /// One band per class.
    pub bands: Vec<Band>,
    /// Raw sensitivities, `[class][replicate]`.
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub view: View,
    pub classes: Vec<String>,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    fn build(view: View, classes: Vec<String>, raw: Vec<(f64, usize, Vec<Vec<f64>>)>) -> Result<Self> {
        let points = raw
            .into_iter()
            .map(|(train, size, samples)| {
                let bands = samples
                    .iter()
                    .map(|v| percentile_band(v, LOWER_PERCENTILE, UPPER_PERCENTILE))
                    .collect::<Result<_>>()?;
                Ok(CurvePoint { train_size_per_class: train, dataset_size_per_class: size, bands, samples })
            })
            .collect::<Result<_>>()?;
        Ok(Self { view, classes, points })
    }

    /// `(train size, mean sensitivity)` for one class.
    pub fn mean_curve(&self, class: usize) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.train_size_per_class, p.bands[class].mean)).collect()
    }
}

/// Transpose `[replicate][class]` into `[class][replicate]`.
fn by_class(rows: Vec<Vec<f64>>, n_classes: usize) -> Vec<Vec<f64>> {
    (0..n_classes).map(|c| rows.iter().map(|r| r[c]).collect()).collect()
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::domain("sizes must be non-empty and positive"));
    }
    Ok(())
}

/// Independent training sets of each size drawn from the population.
pub fn learning_curve_population(
    population: &Population,
    sizes: &[usize],
    n_datasets: usize,
    model: &ModelConfig,
    large_test: &LabeledDataset,
    seed: RngSeed,
) -> Result<LearningCurve> {
    check_sizes(sizes)?;
    if n_datasets == 0 {
        return Err(Error::domain("need at least one dataset per size"));
    }
    let k = population.specs().len();
    let jobs: Vec<(usize, usize)> = sizes.iter().flat_map(|&s| (0..n_datasets).map(move |j| (s, j))).collect();
    let sens: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(s, j)| {
            let train = population.sample(s, seed.derive(&[s as u64, j as u64]));
            sensitivities(&evaluate(model, &train, large_test)?)
        })
        .collect::<Result<_>>()?;
    let raw =
        sizes.iter().zip(sens.chunks(n_datasets)).map(|(&s, rows)| (s as f64, s, by_class(rows.to_vec(), k))).collect();
    LearningCurve::build(View::Population, population.classes(), raw)
}

/// Cross-validation of one nested sequence of growing datasets.
///
/// Returns the truth view (surrogates tested on `large_test`, pooled per
/// iteration) and the view cross-validation itself reports, both plotted
/// against the surrogates' per-class training size.
pub fn learning_curve_growing(
    source: GrowthSource<'_>,
    sizes: &[usize],
    model: &ModelConfig,
    cv: &CvSpec,
    large_test: &LabeledDataset,
) -> Result<(LearningCurve, LearningCurve)> {
    check_sizes(sizes)?;
    let sets = growing_sequence(source, sizes, cv.seed.substream(0))?;
    let classes = sets[0].classes.clone();
    let k = classes.len();
    let mut truth = Vec::with_capacity(sizes.len());
    let mut seen = Vec::with_capacity(sizes.len());
    for (&s, data) in sizes.iter().zip(&sets) {
        let spec = cv.with_seed(cv.seed.derive(&[1, s as u64]));
        let result = iterated_cv(data, model, &spec, Some(large_test))?;
        let train = (cv.k - 1) as f64 / cv.k as f64 * s as f64;
        let pooled = result.external_pooled().expect("external set given")?;
        let t = pooled.iter().map(sensitivities).collect::<Result<Vec<_>>>()?;
        let h = result.held_out.iter().map(sensitivities).collect::<Result<Vec<_>>>()?;
        truth.push((train, s, by_class(t, k)));
        seen.push((train, s, by_class(h, k)));
    }
    Ok((
        LearningCurve::build(View::GrowingTruth, classes.clone(), truth)?,
        LearningCurve::build(View::GrowingCv, classes, seen)?,
    ))
}

/// Repeated stratified subsampling of an existing pool.
///
/// Each model is tested on `test`, or on the part of the pool it was not
/// trained on when no test set is given.
pub fn retrospective_curve(
    pool: &LabeledDataset,
    sizes: &[usize],
    n_redraws: usize,
    model: &ModelConfig,
    test: Option<&LabeledDataset>,
    seed: RngSeed,
) -> Result<LearningCurve> {
    check_sizes(sizes)?;
    if n_redraws == 0 {
        return Err(Error::domain("need at least one redraw per size"));
    }
    let k = pool.n_classes();
    let jobs: Vec<(usize, usize)> = sizes.iter().flat_map(|&s| (0..n_redraws).map(move |j| (s, j))).collect();
    let sens: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(s, j)| {
            let (train, rest) = stratified_draw(pool, s, seed.derive(&[s as u64, j as u64]))?;
            sensitivities(&evaluate(model, &train, test.unwrap_or(&rest))?)
        })
        .collect::<Result<_>>()?;
    let raw =
        sizes.iter().zip(sens.chunks(n_redraws)).map(|(&s, rows)| (s as f64, s, by_class(rows.to_vec(), k))).collect();
    LearningCurve::build(View::Retrospective, pool.classes.clone(), raw)
}

fn format_value(v: f64, precision: Option<usize>) -> String {
    match precision {
        Some(p) => format!("{v:.p$}"),
        None => format!("{v}"),
    }
}

/// Long-format table, one row per view, class, size and statistic.
pub fn write_tidy_csv<W: Write>(
    curves: &[LearningCurve],
    seed: u64,
    config_hash: &str,
    precision: Option<usize>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["view", "class", "train_size_per_class", "statistic", "value", "seed", "config_hash"])?;
    let seed = seed.to_string();
    for curve in curves {
        for point in &curve.points {
            let size = format_value(point.train_size_per_class, None);
            for (class, band) in curve.classes.iter().zip(&point.bands) {
                for (stat, v) in [("p5", band.lo), ("mean", band.mean), ("p95", band.hi)] {
                    w.write_record([
                        curve.view.name(),
                        class,
                        &size,
                        stat,
                        &format_value(v, precision),
                        &seed,
                        config_hash,
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
