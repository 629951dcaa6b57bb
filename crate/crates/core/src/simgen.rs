//! Multivariate Gaussian class populations and dataset drawing.
//!
//! Samples are `mean + R z` with `R` the symmetric matrix root of the class
//! covariance (from its eigendecomposition) and `z` standard normal draws
//! obtained by pushing open-interval uniforms through the inverse normal CDF.

use crate::binio::{BinReader, BinWriter};
use crate::error::{Error, Result};
use crate::rng::{open_unit, RngSeed};
use crate::special::normal_quantile;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};

/// Relative tolerance for covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues above `-EIGEN_CLIP * largest` are clipped to zero; anything
/// more negative is rejected.
pub const EIGEN_CLIP: f64 = 1e-8;

const DATASET_MAGIC: &[u8; 4] = b"CPDS";
const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClassSpec {
    pub label: String,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianClassSpec {
    pub fn new(label: impl Into<String>, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: covariance.nrows() });
        }
        Ok(Self { label: label.into(), mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Content hash of label, mean and covariance.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.label.as_bytes());
        for v in self.mean.iter().chain(self.covariance.iter()) {
            h.update(v.to_le_bytes());
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
    }
}

/// Symmetric root `R = V diag(sqrt(λ)) Vᵀ` with `R Rᵀ = cov`.
pub fn matrix_root(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    if cov.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: cov.ncols() });
    }
    let scale = cov.amax().max(f64::MIN_POSITIVE);
    let asym = (cov - cov.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::domain(format!("covariance is not symmetric (max deviation {asym:e})")));
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let largest = eig.eigenvalues.max().max(0.0);
    if let Some(bad) = eig.eigenvalues.iter().find(|&&l| l < -EIGEN_CLIP * largest) {
        return Err(Error::Singular(format!(" (eigenvalue {bad:e} is negative)")));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: RngSeed,
    pub spec_hash: u64,
}

impl Provenance {
    pub fn external(name: &str) -> Self {
        Self { generator: name.to_string(), seed: RngSeed::new(0), spec_hash: 0 }
    }
}

/// Feature matrix (one row per sample) with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub classes: Vec<String>,
    pub features: DMatrix<f64>,
    /// Indices into `classes`, one per row.
    pub labels: Vec<usize>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(
        classes: Vec<String>,
        features: DMatrix<f64>,
        labels: Vec<usize>,
        provenance: Provenance,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.nrows(), found: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::UnknownLabel(format!("index {bad}")));
        }
        Ok(Self { classes, features, labels, provenance })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices of class `c`, in dataset order.
    pub fn indices_of(&self, c: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == c).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            classes: self.classes.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// CSV with header `label,f1..fd`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["label".to_string()];
        header.extend((1..=self.dim()).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.classes[self.labels[i]].clone()];
            rec.extend(self.features.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`write_csv`](Self::write_csv). Classes are
    /// ordered by first appearance.
    pub fn read_csv<R: Read>(reader: R) -> Result<LabeledDataset> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("label") {
            return Err(Error::Format("first column must be `label`".into()));
        }
        let d = header.len() - 1;
        let mut classes: Vec<String> = Vec::new();
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let label = rec.get(0).unwrap_or_default().to_string();
            let idx = match classes.iter().position(|c| *c == label) {
                Some(idx) => idx,
                None => {
                    classes.push(label);
                    classes.len() - 1
                }
            };
            labels.push(idx);
            for v in rec.iter().skip(1) {
                values.push(v.trim().parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?);
            }
        }
        let features = DMatrix::from_row_slice(labels.len(), d, &values);
        LabeledDataset::new(classes, features, labels, Provenance::external("csv"))
    }

    /// Binary container with embedded provenance; round-trips exactly.
    pub fn write_binary<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BinWriter::new(writer);
        w.bytes(DATASET_MAGIC)?;
        w.u32(DATASET_VERSION)?;
        w.string(&self.provenance.generator)?;
        w.u64(self.provenance.seed.seed)?;
        w.u64(self.provenance.seed.stream)?;
        w.u64(self.provenance.spec_hash)?;
        w.u32(self.classes.len() as u32)?;
        for c in &self.classes {
            w.string(c)?;
        }
        w.u64(self.len() as u64)?;
        w.u64(self.dim() as u64)?;
        for &l in &self.labels {
            w.u32(l as u32)?;
        }
        for i in 0..self.len() {
            for &v in self.features.row(i).iter() {
                w.f64(v)?;
            }
        }
        w.finish()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(reader: R) -> Result<LabeledDataset> {
        let mut r = BinReader::new(reader);
        r.expect_magic(DATASET_MAGIC, DATASET_VERSION)?;
        let generator = r.string()?;
        let seed = RngSeed { seed: r.u64()?, stream: r.u64()? };
        let spec_hash = r.u64()?;
        let k = r.u32()? as usize;
        let classes = (0..k).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let n = r.len()?;
        let d = r.len()?;
        let labels = (0..n).map(|_| r.u32().map(|l| l as usize)).collect::<Result<Vec<_>>>()?;
        let values = (0..n * d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(
            classes,
            DMatrix::from_row_slice(n, d, &values),
            labels,
            Provenance { generator, seed, spec_hash },
        )
    }
}

/// `n` standard normal rows of width `d`, via the inverse normal CDF.
fn standard_normal_rows(n: usize, d: usize, seed: RngSeed) -> DMatrix<f64> {
    let mut rng = seed.rng();
    DMatrix::from_fn(d, n, |_, _| normal_quantile(open_unit(&mut rng))).transpose()
}

fn draw_rows(mean: &DVector<f64>, root: &DMatrix<f64>, n: usize, seed: RngSeed) -> DMatrix<f64> {
    let z = standard_normal_rows(n, mean.len(), seed);
    // R is symmetric, so the rows of Z R are (R z)ᵀ.
    let mut x = z * root;
    for mut row in x.row_iter_mut() {
        row += mean.transpose();
    }
    x
}

/// `n` draws from a single class.
pub fn sample_mvn(spec: &GaussianClassSpec, n: usize, seed: RngSeed) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::domain("at least one sample is required"));
    }
    let root = matrix_root(&spec.covariance)?;
    LabeledDataset::new(
        vec![spec.label.clone()],
        draw_rows(&spec.mean, &root, n, seed),
        vec![0; n],
        Provenance { generator: "mvn".into(), seed, spec_hash: spec.hash() },
    )
}

/// A set of class distributions with precomputed matrix roots.
#[derive(Debug, Clone)]
pub struct Population {
    specs: Vec<GaussianClassSpec>,
    roots: Vec<DMatrix<f64>>,
    hash: u64,
}

impl Population {
    pub fn new(specs: Vec<GaussianClassSpec>) -> Result<Self> {
        let Some(first) = specs.first() else {
            return Err(Error::domain("a population needs at least one class"));
        };
        let d = first.dim();
        if let Some(bad) = specs.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
        }
        let roots = specs.iter().map(|s| matrix_root(&s.covariance)).collect::<Result<Vec<_>>>()?;
        let mut h = Sha256::new();
        for s in &specs {
            h.update(s.hash().to_le_bytes());
        }
        let hash = u64::from_le_bytes(h.finalize()[..8].try_into().expect("32-byte digest"));
        Ok(Self { specs, roots, hash })
    }

    pub fn specs(&self) -> &[GaussianClassSpec] {
        &self.specs
    }

    pub fn classes(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.label.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.specs[0].dim()
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    /// `n_per_class` rows of every class, class-major. Class `c` draws from
    /// substream `c` of `seed`, so prefixes are stable across sizes.
    pub fn sample(&self, n_per_class: usize, seed: RngSeed) -> LabeledDataset {
        let k = self.specs.len();
        let d = self.dim();
        let mut features = DMatrix::zeros(n_per_class * k, d);
        let mut labels = Vec::with_capacity(n_per_class * k);
        for (c, (spec, root)) in self.specs.iter().zip(&self.roots).enumerate() {
            let rows = draw_rows(&spec.mean, root, n_per_class, seed.substream(c as u64));
            features.rows_mut(c * n_per_class, n_per_class).copy_from(&rows);
            labels.extend(std::iter::repeat_n(c, n_per_class));
        }
        LabeledDataset {
            classes: self.classes(),
            features,
            labels,
            provenance: Provenance { generator: "population".into(), seed, spec_hash: self.hash },
        }
    }
}

/// Per-class sample mean and unbiased covariance.
pub fn estimate_class_moments(data: &LabeledDataset) -> Result<Vec<GaussianClassSpec>> {
    (0..data.n_classes())
        .map(|c| {
            let idx = data.indices_of(c);
            if idx.len() < 2 {
                return Err(Error::domain(format!(
                    "class {:?} needs at least two samples, has {}",
                    data.classes[c],
                    idx.len()
                )));
            }
            let rows = data.features.select_rows(&idx);
            let n = idx.len() as f64;
            let mean = rows.row_mean().transpose();
            let mut centered = rows;
            for mut row in centered.row_iter_mut() {
                row -= mean.transpose();
            }
            let cov = centered.transpose() * &centered / (n - 1.0);
            GaussianClassSpec::new(data.classes[c].clone(), mean, cov)
        })
        .collect()
}

/// Class means on a regular simplex with pairwise distance `separation`.
///
/// With `shared_cov` every class has unit covariance, so two classes are
/// separated with Bayes sensitivity `Φ(separation / 2)`. Otherwise each class
/// gets its own random covariance with unit average variance.
pub fn make_problem(
    n_classes: usize,
    dim: usize,
    separation: f64,
    shared_cov: bool,
    seed: RngSeed,
) -> Result<Vec<GaussianClassSpec>> {
    if n_classes < 2 || dim == 0 {
        return Err(Error::domain("need at least two classes and one dimension"));
    }
    if dim < n_classes - 1 {
        return Err(Error::domain(format!(
            "{n_classes} simplex-placed classes need at least {} dimensions",
            n_classes - 1
        )));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::domain("separation must be finite and non-negative"));
    }
    let scale = separation / std::f64::consts::SQRT_2;
    let mut rng = seed.rng();
    (0..n_classes)
        .map(|i| {
            // Helmert basis of the plane orthogonal to (1, ..., 1).
            let mean = DVector::from_fn(dim, |j, _| {
                if j >= n_classes - 1 {
                    return 0.0;
                }
                let m = (j + 1) as f64;
                let v = if i <= j {
                    1.0
                } else if i == j + 1 {
                    -m
                } else {
                    0.0
                };
                scale * v / (m * (m + 1.0)).sqrt()
            });
            let covariance = if shared_cov {
                DMatrix::identity(dim, dim)
            } else {
                let a = DMatrix::from_fn(dim, dim, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
                let c: DMatrix<f64> = &a * a.transpose();
                let t = c.trace() / dim as f64;
                c / t
            };
            GaussianClassSpec::new(format!("c{}", i + 1), mean, covariance)
        })
        .collect()
}

/// Five unit-covariance classes with the difficulty pattern of a blood-cell
/// Raman problem: two clearly separated classes (`rbc`, `leu`) and a chain of
/// three overlapping ones where the middle class (`bt`) is hardest.
pub fn mimic_problem(dim: usize) -> Result<Vec<GaussianClassSpec>> {
    if dim < 4 {
        return Err(Error::domain("the five-class mimic needs at least four dimensions"));
    }
    let point = |coords: &[(usize, f64)]| {
        let mut v = DVector::zeros(dim);
        for &(j, x) in coords {
            v[j] = x;
        }
        v
    };
    let gap = 3.4;
    [
        ("rbc", point(&[(0, 9.0)])),
        ("leu", point(&[(1, 9.0)])),
        ("mcf", point(&[(2, -gap), (3, 0.5)])),
        ("bt", point(&[])),
        ("oci", point(&[(2, gap), (3, 0.5)])),
    ]
    .into_iter()
    .map(|(label, mean)| GaussianClassSpec::new(label, mean, DMatrix::identity(dim, dim)))
    .collect()
}

/// Draw `n_per_class` rows of every class without replacement; returns the
/// drawn set and the remainder of the pool.
pub fn stratified_draw(
    pool: &LabeledDataset,
    n_per_class: usize,
    seed: RngSeed,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut rng = seed.rng();
    let mut chosen = Vec::with_capacity(n_per_class * pool.n_classes());
    let mut taken = vec![false; pool.len()];
    for c in 0..pool.n_classes() {
        let idx = pool.indices_of(c);
        if idx.len() < n_per_class {
            return Err(Error::domain(format!(
                "class {:?} has {} members, {n_per_class} requested",
                pool.classes[c],
                idx.len()
            )));
        }
        for pick in rand::seq::index::sample(&mut rng, idx.len(), n_per_class) {
            chosen.push(idx[pick]);
            taken[idx[pick]] = true;
        }
    }
    let rest: Vec<usize> = (0..pool.len()).filter(|&i| !taken[i]).collect();
    Ok((pool.subset(&chosen), pool.subset(&rest)))
}

pub enum GrowthSource<'a> {
    Pool(&'a LabeledDataset),
    Generator(&'a Population),
}

/// Nested datasets for ascending per-class `sizes`: every set extends its
/// predecessor with new cases and never replaces any.
pub fn growing_sequence(source: GrowthSource<'_>, sizes: &[usize], seed: RngSeed) -> Result<Vec<LabeledDataset>> {
    if sizes.is_empty() {
        return Err(Error::domain("sizes must not be empty"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("sizes must be strictly ascending"));
    }
    let largest = *sizes.last().expect("non-empty");
    let (pool, orders) = match source {
        GrowthSource::Generator(pop) => {
            let pool = pop.sample(largest, seed);
            let orders: Vec<Vec<usize>> = (0..pool.n_classes()).map(|c| pool.indices_of(c)).collect();
            (pool, orders)
        }
        GrowthSource::Pool(pool) => {
            let mut rng = seed.rng();
            let mut orders = Vec::with_capacity(pool.n_classes());
            for c in 0..pool.n_classes() {
                let mut idx = pool.indices_of(c);
                if idx.len() < largest {
                    return Err(Error::domain(format!(
                        "class {:?} has {} members, {largest} requested",
                        pool.classes[c],
                        idx.len()
                    )));
                }
                idx.shuffle(&mut rng);
                orders.push(idx);
            }
            (pool.clone(), orders)
        }
    };
    Ok(sizes
        .iter()
        .map(|&s| {
            let idx: Vec<usize> = orders.iter().flat_map(|o| o[..s].iter().copied()).collect();
            pool.subset(&idx)
        })
        .collect())
}
