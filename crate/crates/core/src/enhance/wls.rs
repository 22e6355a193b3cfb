//! Weighted-least-squares edge-preserving smoothing.
//!
//! Minimizes `sum (u - y)^2 + lambda * sum (a_x (du/dx)^2 + a_y (du/dy)^2)`
//! where the smoothness weights fall off with the log-luminance gradient:
//! `a = (|d log(y + 1e-4)|^alpha + eps)^-1`. The normal equations form the
//! sparse five-point system `(I + lambda * L_a) u = y`.

use super::cg::{self, CgOptions, SpdOperator};
use crate::error::{Error, Result};
use crate::imgcore::Plane;

const LOG_OFFSET: f64 = 1e-4;

/// Smoothness weights on the grid edges.
///
/// `horizontal[i*w + j]` couples `(i, j)` with `(i, j+1)` and is zero in the
/// last column; `vertical[i*w + j]` couples `(i, j)` with `(i+1, j)` and is
/// zero in the last row.
#[derive(Debug, Clone)]
pub struct WlsWeights {
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
}

pub fn smoothness_weights(y: &Plane, alpha: f64, eps: f64) -> WlsWeights {
    let (h, w) = y.dims();
    let log = y.map(|v| (v + LOG_OFFSET).ln());
    let mut horizontal = vec![0.0; h * w];
    let mut vertical = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            if j + 1 < w {
                let d = (log.get(i, j + 1) - log.get(i, j)).abs();
                horizontal[i * w + j] = 1.0 / (d.powf(alpha) + eps);
            }
            if i + 1 < h {
                let d = (log.get(i + 1, j) - log.get(i, j)).abs();
                vertical[i * w + j] = 1.0 / (d.powf(alpha) + eps);
            }
        }
    }
    WlsWeights { horizontal, vertical }
}

/// The operator `I + lambda * L_a` in matrix-free form.
pub struct WlsSystem {
    height: usize,
    width: usize,
    lambda: f64,
    weights: WlsWeights,
}

impl WlsSystem {
    pub fn new(y: &Plane, lambda: f64, alpha: f64, eps: f64) -> Self {
        Self { height: y.height(), width: y.width(), lambda, weights: smoothness_weights(y, alpha, eps) }
    }

    pub fn weights(&self) -> &WlsWeights {
        &self.weights
    }
}

impl SpdOperator for WlsSystem {
    fn dim(&self) -> usize {
        self.height * self.width
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        let (wx, wy) = (&self.weights.horizontal, &self.weights.vertical);
        out.copy_from_slice(x);
        for i in 0..h {
            for j in 0..w {
                let p = i * w + j;
                if j + 1 < w {
                    let flux = self.lambda * wx[p] * (x[p] - x[p + 1]);
                    out[p] += flux;
                    out[p + 1] -= flux;
                }
                if i + 1 < h {
                    let flux = self.lambda * wy[p] * (x[p] - x[p + w]);
                    out[p] += flux;
                    out[p + w] -= flux;
                }
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let (wx, wy) = (&self.weights.horizontal, &self.weights.vertical);
        let mut d = vec![1.0; h * w];
        for i in 0..h {
            for j in 0..w {
                let p = i * w + j;
                if j + 1 < w {
                    d[p] += self.lambda * wx[p];
                    d[p + 1] += self.lambda * wx[p];
                }
                if i + 1 < h {
                    d[p] += self.lambda * wy[p];
                    d[p + w] += self.lambda * wy[p];
                }
            }
        }
        d
    }
}

pub fn wls_smooth(y: &Plane, lambda: f64, alpha: f64, eps: f64) -> Result<Plane> {
    wls_smooth_with(y, lambda, alpha, eps, CgOptions::default())
}

pub fn wls_smooth_with(y: &Plane, lambda: f64, alpha: f64, eps: f64, opts: CgOptions) -> Result<Plane> {
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("WLS lambda must be >= 0, got {lambda}")));
    }
    if !(eps > 0.0) {
        return Err(Error::param(format!("WLS eps must be > 0, got {eps}")));
    }
    if lambda == 0.0 {
        return Ok(y.clone());
    }
    let system = WlsSystem::new(y, lambda, alpha, eps);
    let sol = cg::solve(&system, y.data(), None, opts)?;
    Plane::new(y.height(), y.width(), sol.x)
}
