//! Linear discriminant analysis and the PLS-LDA pipeline.

mod lda;
mod pls;

pub use lda::{fit_lda, LdaConfig, LdaModel, PriorMode, DEFAULT_RIDGE};
pub use pls::{fit_pls, PlsProjection};

use crate::binio::{BinReader, BinWriter};
use crate::error::{Error, Result};
use crate::simgen::LabeledDataset;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};

/// Latent variables used when the training set is large enough.
pub const DEFAULT_LATENT: usize = 10;

const MODEL_MAGIC: &[u8; 4] = b"CPMD";
const MODEL_VERSION: u32 = 1;

/// Latent variables actually fitted: at most half the training spectra.
pub fn effective_latent(requested: usize, n_total: usize, dim: usize) -> usize {
    requested.min(n_total / 2).min(dim).min(n_total.saturating_sub(1))
}

/// Class-indicator responses, one column per class.
pub fn indicator_matrix(labels: &[usize], n_classes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), n_classes, |i, c| if labels[i] == c { 1.0 } else { 0.0 })
}

/// PLS projection followed by LDA on the scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub(crate) projection: PlsProjection,
    pub(crate) lda: LdaModel,
    pub(crate) config_hash: u64,
}

impl PipelineModel {
    pub fn projection(&self) -> &PlsProjection {
        &self.projection
    }

    pub fn lda(&self) -> &LdaModel {
        &self.lda
    }

    pub fn latent(&self) -> usize {
        self.projection.n_components()
    }

    pub fn classes(&self) -> &[String] {
        self.lda.classes()
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<usize>> {
        self.lda.predict(&self.projection.transform(features)?)
    }

    pub fn write_binary<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BinWriter::new(writer);
        w.bytes(MODEL_MAGIC)?;
        w.u32(MODEL_VERSION)?;
        w.u64(self.config_hash)?;
        w.u32(self.lda.classes.len() as u32)?;
        for c in &self.lda.classes {
            w.string(c)?;
        }
        w.f64s(self.projection.x_mean.as_slice())?;
        for m in [
            &self.projection.weights,
            &self.projection.loadings,
            &self.projection.rotation,
            &self.lda.means,
            &self.lda.pooled_covariance,
            &self.lda.weights,
        ] {
            write_matrix(&mut w, m)?;
        }
        w.f64s(&self.lda.priors)?;
        w.f64s(self.lda.offsets.as_slice())?;
        w.finish()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(reader: R) -> Result<PipelineModel> {
        let mut r = BinReader::new(reader);
        r.expect_magic(MODEL_MAGIC, MODEL_VERSION)?;
        let config_hash = r.u64()?;
        let k = r.u32()? as usize;
        let classes = (0..k).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let x_mean = DVector::from_vec(r.f64s()?);
        let weights = read_matrix(&mut r)?;
        let loadings = read_matrix(&mut r)?;
        let rotation = read_matrix(&mut r)?;
        let means = read_matrix(&mut r)?;
        let pooled_covariance = read_matrix(&mut r)?;
        let lda_weights = read_matrix(&mut r)?;
        let priors = r.f64s()?;
        let offsets = DVector::from_vec(r.f64s()?);
        let l = rotation.ncols();
        if rotation.nrows() != x_mean.len()
            || means.shape() != (k, l)
            || lda_weights.shape() != (k, l)
            || priors.len() != k
            || offsets.len() != k
        {
            return Err(Error::Format("inconsistent model dimensions".into()));
        }
        Ok(PipelineModel {
            projection: PlsProjection { x_mean, weights, loadings, rotation },
            lda: LdaModel { classes, means, pooled_covariance, priors, weights: lda_weights, offsets },
            config_hash,
        })
    }
}

fn write_matrix<W: Write>(w: &mut BinWriter<W>, m: &DMatrix<f64>) -> Result<()> {
    w.u64(m.nrows() as u64)?;
    w.u64(m.ncols() as u64)?;
    w.f64s(m.as_slice())
}

fn read_matrix<R: Read>(r: &mut BinReader<R>) -> Result<DMatrix<f64>> {
    let rows = r.len()?;
    let cols = r.len()?;
    let data = r.f64s()?;
    if data.len() != rows * cols {
        return Err(Error::Format(format!("matrix of {rows}x{cols} holds {} values", data.len())));
    }
    Ok(DMatrix::from_vec(rows, cols, data))
}

/// Fit PLS on the class indicators, then LDA on the training scores. The
/// number of latent variables is capped at half the training set size.
pub fn fit_pls_lda(train: &LabeledDataset, requested_latent: usize, lda: &LdaConfig) -> Result<PipelineModel> {
    if requested_latent == 0 {
        return Err(Error::domain("at least one latent variable must be requested"));
    }
    if train.n_classes() < 2 {
        return Err(Error::domain("PLS-LDA needs at least two classes"));
    }
    let n = train.len();
    if n < 2 {
        return Err(Error::domain(format!("PLS-LDA needs at least two training samples, got {n}")));
    }
    let latent = effective_latent(requested_latent, n, train.dim()).max(1);
    let y = indicator_matrix(&train.labels, train.n_classes());
    let projection = fit_pls(&train.features, &y, latent)?;
    let scores = projection.transform(&train.features)?;
    let projected = LabeledDataset {
        classes: train.classes.clone(),
        features: scores,
        labels: train.labels.clone(),
        provenance: train.provenance.clone(),
    };
    let lda_model = fit_lda(&projected, lda)?;
    let mut h = Sha256::new();
    h.update((requested_latent as u64).to_le_bytes());
    h.update(lda.ridge.to_le_bytes());
    h.update([lda.priors as u8]);
    let config_hash = u64::from_le_bytes(h.finalize()[..8].try_into().expect("32-byte digest"));
    Ok(PipelineModel { projection, lda: lda_model, config_hash })
}

/// How to build the classifier for one training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Lda {
        #[serde(default = "default_ridge")]
        ridge: f64,
        #[serde(default)]
        priors: PriorMode,
    },
    PlsLda {
        #[serde(default = "default_latent")]
        latent: usize,
        #[serde(default = "default_ridge")]
        ridge: f64,
        #[serde(default)]
        priors: PriorMode,
    },
    /// Always predicts one class; a perfectly stable reference model.
    Constant { class: usize },
}

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

fn default_latent() -> usize {
    DEFAULT_LATENT
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::PlsLda { latent: DEFAULT_LATENT, ridge: DEFAULT_RIDGE, priors: PriorMode::Equal }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Lda(LdaModel),
    PlsLda(PipelineModel),
    Constant { class: usize, dim: usize },
}

impl ModelConfig {
    pub fn fit(&self, train: &LabeledDataset) -> Result<Model> {
        match *self {
            ModelConfig::Lda { ridge, priors } => Ok(Model::Lda(fit_lda(train, &LdaConfig { ridge, priors })?)),
            ModelConfig::PlsLda { latent, ridge, priors } => {
                Ok(Model::PlsLda(fit_pls_lda(train, latent, &LdaConfig { ridge, priors })?))
            }
            ModelConfig::Constant { class } => {
                if class >= train.n_classes() {
                    return Err(Error::UnknownLabel(format!("index {class}")));
                }
                Ok(Model::Constant { class, dim: train.dim() })
            }
        }
    }
}

impl Model {
    pub fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<usize>> {
        match self {
            Model::Lda(m) => m.predict(features),
            Model::PlsLda(m) => m.predict(features),
            &Model::Constant { class, dim } => {
                if features.ncols() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: features.ncols() });
                }
                Ok(vec![class; features.nrows()])
            }
        }
    }
}
