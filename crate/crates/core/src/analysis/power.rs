use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::linear_least_squares;

/// `rate = a·P² + b·P`, P in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    /// counts/s/mW²
    pub a: f64,
    /// counts/s/mW
    pub b: f64,
    pub covariance: [[f64; 2]; 2],
    pub residual_norm: f64,
}

impl PowerFit {
    pub fn a_sigma(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn b_sigma(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn rate(&self, pump_mw: f64) -> f64 {
        self.a * pump_mw * pump_mw + self.b * pump_mw
    }

    /// Linear (noise) share `bP/(aP² + bP)` of the rate at `pump_mw`.
    pub fn noise_fraction(&self, pump_mw: f64) -> f64 {
        self.b * pump_mw / self.rate(pump_mw)
    }
}

/// Unweighted fit; the covariance is scaled by the residual variance.
pub fn fit_power_quadratic(points: &[(f64, f64)]) -> Result<PowerFit> {
    fit(points, None)
}

/// Fit with per-point standard deviations; the covariance is absolute.
pub fn fit_power_quadratic_weighted(points: &[(f64, f64)], sigmas: &[f64]) -> Result<PowerFit> {
    if sigmas.len() != points.len() || sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Domain("one positive sigma per point required".into()));
    }
    let w: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    fit(points, Some(&w))
}

fn fit(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<PowerFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: distinct.len(),
        });
    }
    let n = points.len();
    let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { points[i].0 * points[i].0 } else { points[i].0 });
    let y = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let sol = linear_least_squares(&design, &y, weights)?;
    let rss = sol.weighted_rss(weights);
    let scale = if weights.is_some() { 1.0 } else { rss / (n as f64 - 2.0) };
    let cov = &sol.normal_inverse * scale;
    Ok(PowerFit {
        a: sol.coefficients[0],
        b: sol.coefficients[1],
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
        residual_norm: rss.sqrt(),
    })
}
