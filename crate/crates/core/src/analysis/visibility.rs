use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fit::linear_least_squares;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub phase: f64,
    pub coincidences: f64,
    pub accidentals: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub visibility: f64,
    pub sigma: f64,
    pub c0: f64,
    pub phase_offset: f64,
    pub chi2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub raw: FringeFit,
    /// Fit to coincidences minus the accidental floor.
    pub subtracted: FringeFit,
}

const REWEIGHT_PASSES: usize = 6;

/// Fits `C(φ) = C0·(1 + V·cos(φ − φ0))` to the raw and the
/// accidental-subtracted counts.
pub fn fit_visibility(scan: &[PhasePoint]) -> Result<VisibilityResult> {
    check_scan(scan)?;
    let phases: Vec<f64> = scan.iter().map(|p| p.phase).collect();
    let raw: Vec<f64> = scan.iter().map(|p| p.coincidences).collect();
    let sub: Vec<f64> = scan.iter().map(|p| p.coincidences - p.accidentals).collect();
    // the subtracted counts still carry the Poisson noise of the accidentals
    // inside the window; the floor itself comes from a wide off-peak region
    let acc: Vec<f64> = scan.iter().map(|p| p.accidentals).collect();
    Ok(VisibilityResult {
        raw: fit_fringe(&phases, &raw, &vec![0.0; raw.len()])?,
        subtracted: fit_fringe(&phases, &sub, &acc)?,
    })
}

fn check_scan(scan: &[PhasePoint]) -> Result<()> {
    if scan.len() < 5 {
        return Err(Error::InsufficientData {
            needed: 5,
            got: scan.len(),
        });
    }
    let lo = scan.iter().map(|p| p.phase).fold(f64::INFINITY, f64::min);
    let hi = scan.iter().map(|p| p.phase).fold(f64::NEG_INFINITY, f64::max);
    let n = scan.len() as f64;
    if hi - lo < 2.0 * PI * (n - 1.0) / n - 1e-9 {
        return domain(format!("phase scan spans {:.3} rad, less than one fringe", hi - lo));
    }
    Ok(())
}

/// Poisson-weighted linear fit of `C0 + A·cos φ + B·sin φ`. The variance of
/// point `i` is the model value plus `extra_variance[i]`; weights start from
/// the counts and are refreshed from the model a few times.
pub fn fit_fringe(phases: &[f64], counts: &[f64], extra_variance: &[f64]) -> Result<FringeFit> {
    let n = phases.len();
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => phases[i].cos(),
        _ => phases[i].sin(),
    });
    let y = DVector::from_column_slice(counts);
    if counts.len() != n || extra_variance.len() != n {
        return domain(format!(
            "{n} phases but {} counts and {} variances",
            counts.len(),
            extra_variance.len()
        ));
    }
    let mut weights: Vec<f64> = counts
        .iter()
        .zip(extra_variance)
        .map(|(c, e)| 1.0 / (c + e).max(1.0))
        .collect();
    let mut sol = linear_least_squares(&design, &y, Some(&weights))?;
    for _ in 0..REWEIGHT_PASSES {
        let model = &design * &sol.coefficients;
        weights = model
            .iter()
            .zip(extra_variance)
            .map(|(m, e)| 1.0 / (m + e).max(1.0))
            .collect();
        sol = linear_least_squares(&design, &y, Some(&weights))?;
    }
    let (c0, a, b) = (sol.coefficients[0], sol.coefficients[1], sol.coefficients[2]);
    if !(c0 > 0.0) || !c0.is_finite() || !a.is_finite() || !b.is_finite() {
        return Err(Error::FitDiverged(format!("fringe mean {c0} is not positive")));
    }
    let amp = a.hypot(b);
    let v = amp / c0;
    let grad = if amp > 0.0 {
        [-v / c0, a / (c0 * amp), b / (c0 * amp)]
    } else {
        [0.0, 1.0 / c0, 0.0]
    };
    let cov = &sol.normal_inverse;
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            var += grad[i] * cov[(i, j)] * grad[j];
        }
    }
    Ok(FringeFit {
        visibility: v,
        sigma: var.max(0.0).sqrt(),
        c0,
        phase_offset: b.atan2(a),
        chi2: sol.weighted_rss(Some(&weights)),
    })
}

/// `(max − min)/(max + min)`.
pub fn visibility_from_extrema(max: f64, min: f64) -> Result<f64> {
    if !(max + min > 0.0) || min < 0.0 || max < min {
        return domain("extrema must satisfy 0 <= min <= max with max > 0");
    }
    Ok((max - min) / (max + min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    pub visibility: f64,
    pub visibility_sigma: f64,
    pub s_value: f64,
    pub s_sigma: f64,
    pub violation_sigmas: f64,
    /// Visibility at which `S = 2`, i.e. `1/√2`.
    pub classical_bound_visibility: f64,
}

/// CHSH parameter from a fringe visibility: `S = 2√2·V`.
pub fn chsh_from_visibility(v: f64, v_sigma: f64) -> Result<BellResult> {
    if !(0.0..=1.0).contains(&v) || !(v_sigma >= 0.0) {
        return domain(format!("visibility {v} ± {v_sigma} outside [0, 1]"));
    }
    let s = 2.0 * SQRT_2 * v;
    let s_sigma = 2.0 * SQRT_2 * v_sigma;
    let violation_sigmas = if s_sigma > 0.0 {
        (s - 2.0) / s_sigma
    } else if s > 2.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(BellResult {
        visibility: v,
        visibility_sigma: v_sigma,
        s_value: s,
        s_sigma,
        violation_sigmas,
        classical_bound_visibility: 1.0 / SQRT_2,
    })
}
