//! Monotone piecewise-cubic Hermite interpolation.

use crate::error::{Error, Result};

/// Cubic Hermite interpolant through `(xs[i], ys[i])` with slopes `ds[i]`.
///
/// Slopes are supplied by the caller (exact derivatives when known) and then
/// limited with the Fritsch–Carlson condition so that monotone data gives a
/// monotone interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneHermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneHermite {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, mut ds: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || ds.len() != n {
            return Err(Error::Precondition(
                "interpolation needs at least two matching nodes".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(
                "interpolation nodes must be strictly increasing".into(),
            ));
        }
        for i in 0..n - 1 {
            let delta = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            if delta == 0.0 {
                ds[i] = 0.0;
                ds[i + 1] = 0.0;
                continue;
            }
            let alpha = ds[i] / delta;
            let beta = ds[i + 1] / delta;
            if alpha < 0.0 {
                ds[i] = 0.0;
            }
            if beta < 0.0 {
                ds[i + 1] = 0.0;
            }
            let r2 = alpha * alpha + beta * beta;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                ds[i] = tau * alpha * delta;
                ds[i + 1] = tau * beta * delta;
            }
        }
        Ok(MonotoneHermite { xs, ys, ds })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("nonempty"))
    }

    fn locate(&self, x: f64) -> Result<usize> {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfTable { value: x, lo, hi });
        }
        let i = self.xs.partition_point(|&v| v <= x);
        Ok(i.saturating_sub(1).min(self.xs.len() - 2))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let i = self.locate(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1])
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let i = self.locate(x)?;
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        Ok(d00 * self.ys[i] + d10 * self.ds[i] + d01 * self.ys[i + 1] + d11 * self.ds[i + 1])
    }
}
