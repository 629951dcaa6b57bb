//! Declarative learning-curve runs.

use crate::classify::ModelConfig;
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::simgen::{make_problem, mimic_problem, GaussianClassSpec, GrowthSource, Population};
use crate::validate::{
    learning_curve_growing, learning_curve_population, retrospective_curve, write_tidy_csv, CvSpec, LearningCurve,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Classes on a regular simplex.
    Simplex {
        classes: usize,
        dim: usize,
        separation: f64,
        #[serde(default = "yes")]
        shared_cov: bool,
    },
    /// The five-class blood-cell mimic.
    Mimic { dim: usize },
}

fn yes() -> bool {
    true
}

impl ProblemSpec {
    pub fn build(&self, seed: RngSeed) -> Result<Vec<GaussianClassSpec>> {
        match *self {
            ProblemSpec::Simplex { classes, dim, separation, shared_cov } => {
                make_problem(classes, dim, separation, shared_cov, seed)
            }
            ProblemSpec::Mimic { dim } => mimic_problem(dim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Population,
    /// Produces both the truth and the cross-validation view.
    Growing,
    Retrospective,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSettings {
    #[serde(default = "five")]
    pub k: usize,
    #[serde(default = "hundred")]
    pub iterations: usize,
    #[serde(default = "yes")]
    pub stratified: bool,
}

fn five() -> usize {
    5
}

fn hundred() -> usize {
    100
}

impl Default for CvSettings {
    fn default() -> Self {
        Self { k: 5, iterations: 100, stratified: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub problem: ProblemSpec,
    /// Dataset sizes, cases per class.
    pub sizes: Vec<usize>,
    #[serde(default = "default_views")]
    pub views: Vec<ViewKind>,
    #[serde(default)]
    pub cv: CvSettings,
    #[serde(default)]
    pub model: ModelConfig,
    /// Independent datasets (or redraws) per size.
    #[serde(default = "hundred")]
    pub n_datasets: usize,
    #[serde(default = "default_test_size")]
    pub test_per_class: usize,
    /// Size of the finite pool used by the retrospective view.
    #[serde(default)]
    pub pool_per_class: Option<usize>,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_views() -> Vec<ViewKind> {
    vec![ViewKind::Population, ViewKind::Growing]
}

fn default_test_size() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub curves: Vec<LearningCurve>,
    pub config_hash: String,
}

impl ScenarioResult {
    pub fn write_csv<W: Write>(&self, seed: u64, precision: Option<usize>, writer: W) -> Result<()> {
        write_tidy_csv(&self.curves, seed, &self.config_hash, precision, writer)
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> Result<String> {
        let json = serde_json::to_string(self)?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) || self.sizes[0] == 0 {
            return Err(Error::domain("sizes must be positive and strictly ascending"));
        }
        if self.views.is_empty() {
            return Err(Error::domain("no views requested"));
        }
        if self.n_datasets == 0 || self.test_per_class == 0 {
            return Err(Error::domain("n_datasets and test_per_class must be positive"));
        }
        if let Some(pool) = self.pool_per_class {
            if pool < *self.sizes.last().expect("non-empty") {
                return Err(Error::domain("pool_per_class is smaller than the largest size"));
            }
        }
        self.cv_spec().validate()
    }

    fn cv_spec(&self) -> CvSpec {
        CvSpec {
            k: self.cv.k,
            iterations: self.cv.iterations,
            seed: RngSeed::new(self.seed).substream(2),
            stratified: self.cv.stratified,
        }
    }

    pub fn run(&self) -> Result<ScenarioResult> {
        self.validate()?;
        let root = RngSeed::new(self.seed);
        let population = Population::new(self.problem.build(root.substream(0))?)?;
        let test = population.sample(self.test_per_class, root.substream(1));
        let mut curves = Vec::new();
        for view in &self.views {
            match view {
                ViewKind::Population => curves.push(learning_curve_population(
                    &population,
                    &self.sizes,
                    self.n_datasets,
                    &self.model,
                    &test,
                    root.substream(3),
                )?),
                ViewKind::Growing => {
                    let (truth, seen) = learning_curve_growing(
                        GrowthSource::Generator(&population),
                        &self.sizes,
                        &self.model,
                        &self.cv_spec(),
                        &test,
                    )?;
                    curves.push(truth);
                    curves.push(seen);
                }
                ViewKind::Retrospective => {
                    let n = self.pool_per_class.unwrap_or(*self.sizes.last().expect("non-empty"));
                    let pool = population.sample(n, root.substream(4));
                    curves.push(retrospective_curve(
                        &pool,
                        &self.sizes,
                        self.n_datasets,
                        &self.model,
                        Some(&test),
                        root.substream(5),
                    )?);
                }
            }
        }
        Ok(ScenarioResult { curves, config_hash: self.config_hash()? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        seed = 11
        sizes = [6, 12]
        views = ["population", "growing", "retrospective"]
        n_datasets = 3
        test_per_class = 50
        pool_per_class = 30

        [problem]
        kind = "simplex"
        classes = 3
        dim = 4
        separation = 2.0

        [cv]
        k = 3
        iterations = 2

        [model]
        kind = "lda"
        ridge = 1e-6
    "#;

    #[test]
    fn toml_round_trip_and_run() {
        let s = Scenario::from_toml(SMALL).unwrap();
        assert_eq!(s.cv.k, 3);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json(&json).unwrap(), s);
        let r = s.run().unwrap();
        assert_eq!(r.curves.len(), 4);
        assert_eq!(r.config_hash.len(), 16);
        assert_eq!(r, s.run().unwrap());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(Scenario::from_toml(&format!("bogus = 1\n{SMALL}")).is_err());
    }
}
