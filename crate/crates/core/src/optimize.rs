//! One-dimensional derivative-free minimization.

use crate::error::{Error, Result};

/// Result of a bounded 1-D minimization.
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `tol`. Both end points are
/// compared against the interior optimum so that minima sitting on a bound
/// are returned exactly.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iterations = 0;
    while b - a > tol {
        if iterations >= max_iter {
            let (x, value) = if fc < fd { (c, fc) } else { (d, fd) };
            return Err(Error::NoConvergence {
                solver: "golden-section search",
                iterations,
                estimate: x,
                residual: value,
            });
        }
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let mut best =
        if fc <= fd { Minimum { x: c, value: fc, iterations } } else { Minimum { x: d, value: fd, iterations } };
    for edge in [lo, hi] {
        let fe = f(edge)?;
        if fe < best.value {
            best = Minimum { x: edge, value: fe, iterations };
        }
    }
    Ok(best)
}
