use crate::error::{Error, Result};
use crate::optimize::golden_section;
use serde::{Deserialize, Serialize};

/// Lower percentile, mean and upper percentile of one set of replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub mean: f64,
    pub hi: f64,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Linear-interpolation quantile (the usual "type 7" definition).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `lo` and `hi` are percentages, e.g. 5 and 95.
pub fn percentile_band(values: &[f64], lo: f64, hi: f64) -> Result<Band> {
    if values.is_empty() {
        return Err(Error::domain("no values to summarize"));
    }
    if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo > hi {
        return Err(Error::domain(format!("invalid percentile range [{lo}, {hi}]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("values must be finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Band {
        lo: quantile_sorted(&sorted, lo / 100.0),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        hi: quantile_sorted(&sorted, hi / 100.0),
    })
}

/// `p(n) = a - b * n^(-c)` with `a` in [0, 1], `b >= 0`, `c > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub residual_norm: f64,
}

impl PowerLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.a - self.b * n.powf(-self.c)
    }
}

const MAX_EXPONENT: f64 = 5.0;
const GRID: usize = 200;

/// Best `(a, b, sse)` for a fixed exponent.
fn linear_part(points: &[(f64, f64)], c: f64) -> (f64, f64, f64) {
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.powf(-c)).collect();
    let sse = |a: f64, b: f64| points.iter().zip(&xs).map(|(&(_, p), &x)| (p - a + b * x).powi(2)).sum::<f64>();
    let m = points.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let pbar = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxp: f64 = xs.iter().zip(points).map(|(x, &(_, p))| (x - xbar) * (p - pbar)).sum();

    let mut candidates = Vec::with_capacity(4);
    if sxx > 1e-300 {
        let b = -sxp / sxx;
        let a = pbar + b * xbar;
        if (0.0..=1.0).contains(&a) && b >= 0.0 {
            return (a, b, sse(a, b));
        }
    }
    // Constrained optimum lies on the boundary of the feasible set.
    candidates.push((pbar.clamp(0.0, 1.0), 0.0));
    let sxx0: f64 = xs.iter().map(|x| x * x).sum();
    for a in [0.0, 1.0] {
        let b = (xs.iter().zip(points).map(|(x, &(_, p))| x * (a - p)).sum::<f64>() / sxx0).max(0.0);
        candidates.push((a, b));
    }
    candidates.into_iter().map(|(a, b)| (a, b, sse(a, b))).min_by(|x, y| x.2.total_cmp(&y.2)).expect("candidates")
}

/// Least-squares inverse power law through `(n, performance)` points.
///
/// The model is linear in `a` and `b` once `c` is fixed, so the fit scans
/// `c` on a grid over (0, 5] and refines the best cell by golden section.
pub fn fit_inverse_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 4 {
        return Err(Error::domain("need at least four points"));
    }
    if points.iter().any(|&(n, p)| !(n > 0.0) || !n.is_finite() || !p.is_finite()) {
        return Err(Error::domain("points must have positive sizes and finite values"));
    }
    let mut sizes: Vec<f64> = points.iter().map(|p| p.0).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::domain("need at least three distinct sizes"));
    }
    let step = MAX_EXPONENT / GRID as f64;
    let best = (1..=GRID)
        .map(|i| (i, linear_part(points, i as f64 * step).2))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty grid")
        .0;
    let lo = (best as f64 - 1.0).max(1e-6) * step;
    let hi = (best + 1).min(GRID) as f64 * step;
    let m = golden_section(|c| Ok(linear_part(points, c).2), lo, hi, 1e-12, 500)?;
    let (a, b, sse) = linear_part(points, m.x);
    Ok(PowerLawFit { a, b, c: m.x, residual_norm: sse.sqrt() })
}
