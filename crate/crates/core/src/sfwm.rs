//! Spontaneous four-wave-mixing pair generation in a ring, the probability
//! that a generated photon leaves through the bus, and coupling design.
//!
//! The emitted rate is computed as the literal product `N_c · p`, which scales
//! as `Q⁸/Qe⁵` on phase matching. That product is maximised at
//! `Qe = 0.6·Qi`, while the generation rate alone peaks at `Qe = 0.75·Qi`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::resonator::{ModeProperties, QualityFactors, RingGeometry};
use crate::units::{sinc, wavelength_to_angular};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    /// Input (bus) pump power, W.
    pub power: f64,
    pub wavelength: f64,
    pub on_resonance: bool,
}

impl PumpConfig {
    pub fn on_resonance(power: f64, wavelength: f64) -> Result<Self> {
        if !(power >= 0.0) {
            return domain(format!("pump power must be non-negative, got {power}"));
        }
        Ok(Self {
            power,
            wavelength,
            on_resonance: true,
        })
    }

    pub fn omega(&self) -> f64 {
        wavelength_to_angular(self.wavelength)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub generation_rate: f64,
    pub emission_probability: f64,
    pub emitted_rate: f64,
    pub phase_matching_factor: f64,
}

/// `sinc²(L·Δκ/2)`.
pub fn phase_matching_factor(roundtrip_length: f64, phase_mismatch: f64) -> f64 {
    let s = sinc(roundtrip_length * phase_mismatch / 2.0);
    s * s
}

/// Intracavity pair generation rate, pairs/s:
/// `N_c = 32·v_g⁴·γ²·P²·Q⁷ / (ω0³·L²·Qe⁴) · sinc²(L·Δκ/2)`.
pub fn pair_generation_rate(
    mode: &ModeProperties,
    geometry: &RingGeometry,
    q: &QualityFactors,
    pump: &PumpConfig,
    phase_mismatch: f64,
) -> Result<f64> {
    if !pump.on_resonance {
        return domain("rate model assumes the pump sits on a resonance");
    }
    if !(pump.power >= 0.0) {
        return domain(format!("pump power must be non-negative, got {}", pump.power));
    }
    let vg = mode.group_velocity;
    let omega0 = pump.omega();
    let l = geometry.roundtrip_length();
    let ql = q.q_loaded();
    let qe = q.q_external();
    let prefactor = 32.0 * vg.powi(4) * mode.gamma.powi(2) * pump.power.powi(2) / (omega0.powi(3) * l * l);
    // Q⁷/Qe⁴ = Q³·(Q/Qe)⁴ keeps intermediates near 1e18 rather than 1e42.
    let q_term = ql.powi(3) * (ql / qe).powi(4);
    Ok(prefactor * q_term * phase_matching_factor(l, phase_mismatch))
}

/// Partial sum of the bus-escape series
/// `κ² + (1−κ²)a²κ² + (1−κ²)²a⁴κ² + …`. `terms = None` gives the closed form
/// `κ²/(1 − a² + a²κ²)`.
pub fn emission_probability_series(kappa_sq: f64, roundtrip_survival: f64, terms: Option<usize>) -> Result<f64> {
    if !(kappa_sq > 0.0 && kappa_sq <= 1.0) {
        return domain(format!("kappa^2 must lie in (0, 1], got {kappa_sq}"));
    }
    if !(roundtrip_survival > 0.0 && roundtrip_survival <= 1.0) {
        return domain(format!("a^2 must lie in (0, 1], got {roundtrip_survival}"));
    }
    let a2 = roundtrip_survival;
    match terms {
        None => Ok(kappa_sq / (1.0 - a2 + a2 * kappa_sq)),
        Some(n) => {
            let ratio = (1.0 - kappa_sq) * a2;
            let mut term = kappa_sq;
            let mut sum = 0.0;
            for _ in 0..n {
                sum += term;
                term *= ratio;
            }
            Ok(sum)
        }
    }
}

/// High-Q escape probability `p = Q/Qe`.
pub fn emission_probability(q: &QualityFactors) -> f64 {
    q.q_loaded() / q.q_external()
}

pub fn emitted_pair_rate(
    mode: &ModeProperties,
    geometry: &RingGeometry,
    q: &QualityFactors,
    pump: &PumpConfig,
    phase_mismatch: f64,
) -> Result<RateBreakdown> {
    let generation_rate = pair_generation_rate(mode, geometry, q, pump, phase_mismatch)?;
    let p = emission_probability(q);
    Ok(RateBreakdown {
        generation_rate,
        emission_probability: p,
        emitted_rate: generation_rate * p,
        phase_matching_factor: phase_matching_factor(geometry.roundtrip_length(), phase_mismatch),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingObjective {
    MaxGeneration,
    MaxEmitted,
}

impl CouplingObjective {
    /// Natural log of the Qe-dependent part of the objective at fixed Qi
    /// (`Q⁷/Qe⁴` or `Q⁸/Qe⁵`). Everything dropped is independent of Qe.
    pub fn log_value(self, q_intrinsic: f64, q_external: f64) -> f64 {
        let ql = 1.0 / (1.0 / q_intrinsic + 1.0 / q_external);
        let (a, b) = match self {
            CouplingObjective::MaxGeneration => (7.0, 4.0),
            CouplingObjective::MaxEmitted => (8.0, 5.0),
        };
        a * ql.ln() - b * q_external.ln()
    }
}

/// Golden-section maximisation of a unimodal `f` on `[lo, hi]`, stopping when
/// the bracket is narrower than `tol`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    (lo + hi) / 2.0
}

/// Qe that maximises the chosen objective at fixed Qi. Searches `ln Qe` over
/// `[1e-3·Qi, 1e3·Qi]`.
pub fn optimize_external_q(q_intrinsic: f64, objective: CouplingObjective) -> Result<f64> {
    if !(q_intrinsic > 0.0) || !q_intrinsic.is_finite() {
        return domain(format!("intrinsic Q must be positive and finite, got {q_intrinsic}"));
    }
    let lo = (1e-3 * q_intrinsic).ln();
    let hi = (1e3 * q_intrinsic).ln();
    let ln_qe = golden_section_max(|x| objective.log_value(q_intrinsic, x.exp()), lo, hi, 1e-10);
    Ok(ln_qe.exp())
}

/// Degenerate-FWM phase mismatch for the pair at mode offset µ:
/// `Δκ = β2·(µ·D1)² + 2γ·P_circ`.
pub fn phase_mismatch_model(mode_index: i64, beta2: f64, d1: f64, gamma: f64, circulating_power: f64) -> f64 {
    let detuning = mode_index as f64 * d1;
    beta2 * detuning * detuning + 2.0 * gamma * circulating_power
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q_i: f64,
    pub q_e: f64,
    pub n_c: f64,
    pub p: f64,
    pub n_cc: f64,
}

/// Log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Evaluates the rate model on every (Qi, Qe) grid point, phase matched.
/// Rows are ordered Qi-major regardless of thread scheduling.
pub fn sweep_q_grid(
    mode: &ModeProperties,
    geometry: &RingGeometry,
    pump: &PumpConfig,
    q_i_values: &[f64],
    q_e_values: &[f64],
) -> Result<Vec<SweepPoint>> {
    let cells: Vec<(f64, f64)> = q_i_values
        .iter()
        .flat_map(|&qi| q_e_values.iter().map(move |&qe| (qi, qe)))
        .collect();
    cells
        .par_iter()
        .map(|&(q_i, q_e)| {
            let q = QualityFactors::new(q_i, q_e)?;
            let r = emitted_pair_rate(mode, geometry, &q, pump, 0.0)?;
            Ok(SweepPoint {
                q_i,
                q_e,
                n_c: r.generation_rate,
                p: r.emission_probability,
                n_cc: r.emitted_rate,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for p in points {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub objective: CouplingObjective,
    pub q_intrinsic: f64,
    pub q_external_opt: f64,
    pub ratio: f64,
    pub q_loaded_opt: f64,
    pub emission_probability_opt: f64,
}

pub fn optimizer_summary(q_intrinsic: f64, objective: CouplingObjective) -> Result<OptimizerSummary> {
    let qe = optimize_external_q(q_intrinsic, objective)?;
    let q = QualityFactors::new(q_intrinsic, qe)?;
    Ok(OptimizerSummary {
        objective,
        q_intrinsic,
        q_external_opt: qe,
        ratio: qe / q_intrinsic,
        q_loaded_opt: q.q_loaded(),
        emission_probability_opt: emission_probability(&q),
    })
}
