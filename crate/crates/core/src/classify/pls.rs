//! Multi-response PLS (NIPALS) used as a supervised projection.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

const MAX_ITER: usize = 500;
const TOL: f64 = 1e-12;

/// Centering vector plus the `d × L` weight, loading and rotation matrices.
/// Scores of new data are `(x - x_mean) · rotation`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsProjection {
    pub(crate) x_mean: DVector<f64>,
    pub(crate) weights: DMatrix<f64>,
    pub(crate) loadings: DMatrix<f64>,
    pub(crate) rotation: DMatrix<f64>,
}

impl PlsProjection {
    pub fn n_components(&self) -> usize {
        self.rotation.ncols()
    }

    pub fn dim(&self) -> usize {
        self.x_mean.len()
    }

    pub fn x_mean(&self) -> &DVector<f64> {
        &self.x_mean
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.ncols() });
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.x_mean.transpose();
        }
        Ok(centered * &self.rotation)
    }
}

fn center_columns(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mean = m.row_mean().transpose();
    let mut c = m.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.transpose();
    }
    (c, mean)
}

/// Fit `n_components` latent variables of `x` (n × d) against the responses
/// `y` (n × q), deflating `x` only.
///
/// Each inner power iteration starts from the dominant eigenvector of the
/// small `q × q` cross-product, so it normally confirms convergence after one
/// or two rounds. Extraction stops early once `x` carries no more covariance
/// with `y`.
pub fn fit_pls(x: &DMatrix<f64>, y: &DMatrix<f64>, n_components: usize) -> Result<PlsProjection> {
    let (n, d) = x.shape();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.nrows() });
    }
    if n_components == 0 {
        return Err(Error::domain("at least one latent variable is required"));
    }
    if n < 2 || n_components > d.min(n - 1) {
        return Err(Error::domain(format!(
            "{n_components} latent variables exceed min(d = {d}, n - 1 = {})",
            n.saturating_sub(1)
        )));
    }
    let (mut xr, x_mean) = center_columns(x);
    let (yc, _) = center_columns(y);
    let scale = xr.norm().max(f64::MIN_POSITIVE);
    let mut weights = Vec::new();
    let mut loadings = Vec::new();
    for _ in 0..n_components {
        let xty = xr.transpose() * &yc;
        if xty.norm() <= 1e-12 * scale * yc.norm().max(1.0) {
            break;
        }
        let small = SymmetricEigen::new(xty.transpose() * &xty);
        let top = small.eigenvalues.imax();
        let c0 = small.eigenvectors.column(top).into_owned();
        let mut u = &yc * c0;
        let mut t_old: Option<DVector<f64>> = None;
        let mut converged = None;
        for _ in 0..MAX_ITER {
            let mut w = xr.transpose() * &u;
            let wn = w.norm();
            if wn == 0.0 {
                break;
            }
            w /= wn;
            let t = &xr * &w;
            let tt = t.dot(&t);
            let c = yc.transpose() * &t / tt;
            u = &yc * &c / c.dot(&c);
            if let Some(prev) = &t_old {
                if (&t - prev).norm() <= TOL * t.norm() {
                    converged = Some((w, t));
                    break;
                }
            }
            t_old = Some(t);
        }
        let Some((mut w, mut t)) = converged else {
            let residual = t_old.map(|t| t.norm()).unwrap_or(f64::NAN);
            return Err(Error::NoConvergence {
                solver: "PLS inner power iteration",
                iterations: MAX_ITER,
                estimate: weights.len() as f64,
                residual,
            });
        };
        // Deterministic sign: largest weight entry positive.
        if w[w.iamax()] < 0.0 {
            w = -w;
            t = -t;
        }
        let p = xr.transpose() * &t / t.dot(&t);
        xr -= &t * p.transpose();
        weights.push(w);
        loadings.push(p);
    }
    if weights.is_empty() {
        return Err(Error::domain("predictors carry no covariance with the responses"));
    }
    let weights = DMatrix::from_columns(&weights);
    let loadings = DMatrix::from_columns(&loadings);
    let pw = loadings.transpose() * &weights;
    let inv = pw.try_inverse().ok_or_else(|| Error::Singular(" (PLS loading-weight product)".into()))?;
    let rotation = &weights * inv;
    Ok(PlsProjection { x_mean, weights, loadings, rotation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = RngSeed::new(seed).rng();
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn univariate_direction() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = DMatrix::from_column_slice(4, 1, &[-1.0, -2.0, -3.0, -4.0]);
        let p = fit_pls(&x, &y, 1).unwrap();
        assert_eq!(p.weights()[(0, 0)], 1.0);
    }

    #[test]
    fn scores_are_orthogonal_and_centered() {
        let x = random(40, 12, 1);
        let y = random(40, 3, 2);
        let p = fit_pls(&x, &y, 8).unwrap();
        let t = p.transform(&x).unwrap();
        let g = t.transpose() * &t;
        for i in 0..g.nrows() {
            for j in 0..i {
                assert!(g[(i, j)].abs() <= 1e-8 * (g[(i, i)] * g[(j, j)]).sqrt(), "{i} {j}");
            }
        }
        let mean_row = DMatrix::from_row_slice(1, 12, p.x_mean().as_slice());
        assert!(p.transform(&mean_row).unwrap().amax() < 1e-10);
    }

    #[test]
    fn rejects_bad_requests() {
        let x = random(5, 3, 1);
        let y = random(5, 2, 2);
        assert!(fit_pls(&x, &y, 0).is_err());
        assert!(fit_pls(&x, &y, 4).is_err());
        assert!(fit_pls(&x, &random(4, 2, 2), 1).is_err());
    }

    #[test]
    fn stops_when_y_exhausted() {
        // y is an exact linear function of one direction of x.
        let x = random(30, 5, 3);
        let y = x.columns(0, 1).into_owned();
        let p = fit_pls(&x, &y, 4).unwrap();
        assert!(p.n_components() >= 1);
        assert_eq!(p.transform(&x).unwrap().ncols(), p.n_components());
    }
}
