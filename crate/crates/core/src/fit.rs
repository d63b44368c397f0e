//! Small least-squares solvers shared by the resonance, dispersion, power and
//! fringe fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solution of a (weighted) linear least-squares problem.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub coefficients: DVector<f64>,
    /// `(Xᵀ W X)⁻¹`. Multiply by a residual variance when weights are not
    /// inverse variances.
    pub normal_inverse: DMatrix<f64>,
    pub residuals: DVector<f64>,
}

impl LinearSolution {
    pub fn weighted_rss(&self, weights: Option<&[f64]>) -> f64 {
        self.residuals
            .iter()
            .enumerate()
            .map(|(i, r)| weights.map_or(1.0, |w| w[i]) * r * r)
            .sum()
    }
}

/// Solves `min Σ wᵢ (yᵢ − xᵢ·β)²`.
///
/// Columns are rescaled to unit norm before the SVD so polynomial designs
/// with wildly different column magnitudes stay well conditioned. A design
/// whose reciprocal condition number drops below `1e-12` is rejected.
pub fn linear_least_squares(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: Option<&[f64]>,
) -> Result<LinearSolution> {
    let (n, p) = design.shape();
    if n < p {
        return Err(Error::InsufficientData { needed: p, got: n });
    }
    let mut a = design.clone();
    let mut b = y.clone();
    if let Some(w) = weights {
        for i in 0..n {
            let s = w[i].max(0.0).sqrt();
            a.row_mut(i).scale_mut(s);
            b[i] *= s;
        }
    }
    let mut scale = DVector::zeros(p);
    for j in 0..p {
        let norm = a.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::FitDegenerate(format!("design column {j} is zero")));
        }
        scale[j] = norm;
        a.column_mut(j).unscale_mut(norm);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::FitDegenerate(format!(
            "reciprocal condition number {:.3e}",
            smin / smax
        )));
    }
    let scaled = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::FitDegenerate(e.to_string()))?;
    let coefficients = scaled.component_div(&scale);

    // (AᵀA)⁻¹ = V Σ⁻² Vᵀ in scaled coordinates.
    let v_t = svd.v_t.expect("v_t requested");
    let inv_s2 = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    let scaled_inverse = v_t.transpose() * inv_s2 * &v_t;
    let mut normal_inverse = scaled_inverse;
    for i in 0..p {
        for j in 0..p {
            normal_inverse[(i, j)] /= scale[i] * scale[j];
        }
    }
    let residuals = y - design * &coefficients;
    Ok(LinearSolution {
        coefficients,
        normal_inverse,
        residuals,
    })
}

/// Outcome of a Levenberg–Marquardt run.
#[derive(Debug, Clone)]
pub struct NonlinearSolution {
    pub params: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// `(JᵀJ)⁻¹` at the solution.
    pub normal_inverse: DMatrix<f64>,
}

/// Levenberg–Marquardt with forward-difference Jacobians.
///
/// `residuals(params, out)` fills one residual per sample. `steps` gives the
/// finite-difference increment for each parameter.
pub fn levenberg_marquardt<F>(
    mut residuals: F,
    initial: &[f64],
    steps: &[f64],
    n_samples: usize,
    max_iterations: usize,
) -> Result<NonlinearSolution>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let p = initial.len();
    let mut params = initial.to_vec();
    let mut r = vec![0.0; n_samples];
    let mut r_trial = vec![0.0; n_samples];
    residuals(&params, &mut r);
    let mut cost: f64 = r.iter().map(|x| x * x).sum();
    if !cost.is_finite() {
        return Err(Error::FitDiverged("non-finite initial residuals".into()));
    }
    let mut lambda = 1e-3;
    let mut jac = DMatrix::zeros(n_samples, p);
    let mut iterations = 0;

    let jacobian = |params: &[f64], r: &[f64], jac: &mut DMatrix<f64>, residuals: &mut F| {
        let mut shifted = params.to_vec();
        let mut r_step = vec![0.0; n_samples];
        for j in 0..p {
            let h = steps[j];
            shifted[j] = params[j] + h;
            residuals(&shifted, &mut r_step);
            for i in 0..n_samples {
                jac[(i, j)] = (r_step[i] - r[i]) / h;
            }
            shifted[j] = params[j];
        }
    };

    jacobian(&params, &r, &mut jac, &mut residuals);
    while iterations < max_iterations {
        iterations += 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for k in 0..p {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(delta) = damped.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            residuals(&trial, &mut r_trial);
            let trial_cost: f64 = r_trial.iter().map(|x| x * x).sum();
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel_change = delta
                    .iter()
                    .zip(trial.iter())
                    .map(|(d, t)| (d / t.abs().max(1e-300)).abs())
                    .fold(0.0, f64::max);
                let cost_drop = cost - trial_cost;
                params = trial;
                std::mem::swap(&mut r, &mut r_trial);
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel_change < 1e-12 || cost_drop <= 1e-15 * cost.max(1e-300) {
                    return finish(params, cost, iterations, &mut residuals, &r, &mut jac, jacobian);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: we sit at a (local) minimum.
            return finish(params, cost, iterations, &mut residuals, &r, &mut jac, jacobian);
        }
        jacobian(&params, &r, &mut jac, &mut residuals);
    }
    Err(Error::FitDiverged(format!(
        "no convergence after {max_iterations} iterations"
    )))
}

fn finish<F, J>(
    params: Vec<f64>,
    cost: f64,
    iterations: usize,
    residuals: &mut F,
    r: &[f64],
    jac: &mut DMatrix<f64>,
    jacobian: J,
) -> Result<NonlinearSolution>
where
    F: FnMut(&[f64], &mut [f64]),
    J: Fn(&[f64], &[f64], &mut DMatrix<f64>, &mut F),
{
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::FitDiverged("non-finite parameters".into()));
    }
    jacobian(&params, r, jac, residuals);
    let jtj = jac.transpose() * &*jac;
    let normal_inverse = jtj
        .try_inverse()
        .ok_or_else(|| Error::FitDiverged("singular normal matrix at solution".into()))?;
    Ok(NonlinearSolution {
        params,
        residual_norm: cost.sqrt(),
        iterations,
        normal_inverse,
    })
}
