//! Poisson-resampling uncertainties for any estimator over count data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::efficiency::EfficiencyInputs;
use super::visibility::PhasePoint;
use crate::error::{Error, Result};

/// Data whose raw counts can be redrawn from Poisson distributions.
pub trait PoissonResample: Sized {
    fn resample(&self, rng: &mut ChaCha8Rng) -> Self;
}

pub(crate) fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(mean)
    } else {
        0.0
    }
}

/// Accidental floors come from wide off-peak regions and are held fixed.
impl PoissonResample for Vec<PhasePoint> {
    fn resample(&self, rng: &mut ChaCha8Rng) -> Self {
        self.iter()
            .map(|p| PhasePoint {
                phase: p.phase,
                coincidences: poisson(rng, p.coincidences),
                accidentals: p.accidentals,
            })
            .collect()
    }
}

/// Pump powers with the counts collected at each over `integration_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerScan {
    pub integration_time: f64,
    /// (pump mW, counts)
    pub points: Vec<(f64, f64)>,
}

impl PowerScan {
    pub fn rates(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|&(p, n)| (p, n / self.integration_time)).collect()
    }
}

impl PoissonResample for PowerScan {
    fn resample(&self, rng: &mut ChaCha8Rng) -> Self {
        Self {
            integration_time: self.integration_time,
            points: self.points.iter().map(|&(p, n)| (p, poisson(rng, n))).collect(),
        }
    }
}

/// Efficiency inputs paired with the integration time that turns rates back
/// into counts. Redraws singles and coincidences; the accidental floor is
/// held fixed as for phase scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCounts {
    pub integration_time: f64,
    pub rates: EfficiencyInputs,
}

impl PoissonResample for EfficiencyCounts {
    fn resample(&self, rng: &mut ChaCha8Rng) -> Self {
        let t = self.integration_time;
        let mut draw = |rate: f64| poisson(rng, rate * t) / t;
        let r = self.rates;
        Self {
            integration_time: t,
            rates: EfficiencyInputs {
                singles_s: draw(r.singles_s),
                singles_i: draw(r.singles_i),
                coincidences: draw(r.coincidences),
                ..r
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub means: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub failed: usize,
}

/// Largest tolerated share of failing trials.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// Re-runs `estimator` on `trials` Poisson redraws of `data`. Trial `k` uses
/// ChaCha8 stream `k` of `seed`, so the result does not depend on scheduling.
pub fn monte_carlo_uncertainty<D, F>(data: &D, estimator: F, trials: usize, seed: u64) -> Result<MonteCarloSummary>
where
    D: PoissonResample + Sync,
    F: Fn(&D) -> Result<Vec<f64>> + Sync,
{
    if trials < 2 {
        return Err(Error::InsufficientData { needed: 2, got: trials });
    }
    let outcomes: Vec<Option<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            estimator(&data.resample(&mut rng)).ok()
        })
        .collect();
    let ok: Vec<&Vec<f64>> = outcomes.iter().flatten().collect();
    let failed = trials - ok.len();
    if failed as f64 > MAX_FAILURE_FRACTION * trials as f64 || ok.len() < 2 {
        return Err(Error::UnstableEstimate { failed, trials });
    }
    let dim = ok[0].len();
    let n = ok.len() as f64;
    let mut means = vec![0.0; dim];
    for v in &ok {
        for (m, x) in means.iter_mut().zip(v.iter()) {
            *m += x / n;
        }
    }
    let mut sigmas = vec![0.0; dim];
    for v in &ok {
        for (i, x) in v.iter().enumerate() {
            sigmas[i] += (x - means[i]).powi(2) / (n - 1.0);
        }
    }
    sigmas.iter_mut().for_each(|s| *s = s.sqrt());
    Ok(MonteCarloSummary {
        means,
        sigmas,
        trials,
        failed,
    })
}
