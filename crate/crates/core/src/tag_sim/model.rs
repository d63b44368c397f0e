use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default non-paralyzable dead time, s.
pub const DEFAULT_DEAD_TIME: f64 = 50e-9;

/// Default cap on generated records.
pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

/// Stochastic description of the pair source.
///
/// Pump power is in mW throughout: the pair rate is `a·P²` pairs/s and the
/// noise-photon rate on a channel is `b·P` photons/s, both counted at the chip
/// output before any collection loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    /// `a`, pairs/s/mW².
    pub pair_rate_quadratic_coeff: f64,
    /// `b` on the signal side, photons/s/mW.
    pub noise_rate_linear_coeff_signal: f64,
    /// `b` on the idler side, photons/s/mW.
    pub noise_rate_linear_coeff_idler: f64,
    /// FWHM of the signal–idler delay distribution, s.
    pub correlation_fwhm: f64,
    /// Number of independent thermal modes `K`.
    pub thermal_mode_count: u32,
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.pair_rate_quadratic_coeff,
            self.noise_rate_linear_coeff_signal,
            self.noise_rate_linear_coeff_idler,
        ];
        if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::Config("source rates must be finite and non-negative".into()));
        }
        if !(self.correlation_fwhm > 0.0) {
            return Err(Error::Config("correlation_fwhm must be positive".into()));
        }
        if self.thermal_mode_count < 1 {
            return Err(Error::Config("thermal_mode_count must be >= 1".into()));
        }
        Ok(())
    }

    /// Emitted pair rate `N_cc = a·P²` at `pump_mw`.
    pub fn emitted_pair_rate(&self, pump_mw: f64) -> f64 {
        self.pair_rate_quadratic_coeff * pump_mw * pump_mw
    }

    pub fn noise_rates(&self, pump_mw: f64) -> (f64, f64) {
        (
            self.noise_rate_linear_coeff_signal * pump_mw,
            self.noise_rate_linear_coeff_idler * pump_mw,
        )
    }

    /// Coherence-slot width `τ_c/ln 2`, s.
    pub fn slot_width(&self) -> f64 {
        self.correlation_fwhm / LN_2
    }

    /// Mean pairs per coherence slot at `pump_mw`.
    pub fn mean_pairs_per_slot(&self, pump_mw: f64) -> f64 {
        self.emitted_pair_rate(pump_mw) * self.slot_width()
    }

    /// Sets `a` so that a slot holds `mu_slot` pairs on average at `pump_mw`.
    pub fn with_mean_pairs_per_slot(mut self, mu_slot: f64, pump_mw: f64) -> Self {
        self.pair_rate_quadratic_coeff = mu_slot / (self.slot_width() * pump_mw * pump_mw);
        self
    }
}

/// Coincidence-peak FWHM estimate `1/(π·Δν)` from a cavity linewidth in Hz.
/// Empirical helper; it matches over-coupled rings better than under-coupled
/// ones.
pub fn correlation_fwhm_from_linewidth(linewidth_hz: f64) -> f64 {
    1.0 / (std::f64::consts::PI * linewidth_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// counts/s
    pub dark_rate: f64,
    /// Gaussian timing jitter σ, s.
    pub jitter_sigma: f64,
    /// Non-paralyzable dead time, s.
    pub dead_time: f64,
}

impl DetectorModel {
    /// Unit efficiency, no darks, no jitter, no dead time.
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            jitter_sigma: 0.0,
            dead_time: 0.0,
        }
    }

    pub fn with_efficiency(efficiency: f64) -> Self {
        Self {
            efficiency,
            ..Self::ideal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Config(format!("detector efficiency {} outside [0, 1]", self.efficiency)));
        }
        if [self.dark_rate, self.jitter_sigma, self.dead_time].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("dark_rate, jitter_sigma and dead_time must be >= 0".into()));
        }
        Ok(())
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 0.8,
            dark_rate: 100.0,
            jitter_sigma: 30e-12,
            dead_time: DEFAULT_DEAD_TIME,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FransonConfig {
    /// Long–short arm delay ΔT, s.
    pub umi_delay: f64,
    pub phase_alpha: f64,
    pub phase_beta: f64,
    /// Both photons share one interferometer; the fringe phase is then 2α.
    pub folded: bool,
    pub intrinsic_visibility: f64,
}

impl Default for FransonConfig {
    fn default() -> Self {
        Self {
            umi_delay: 10e-9,
            phase_alpha: 0.0,
            phase_beta: 0.0,
            folded: false,
            intrinsic_visibility: 1.0,
        }
    }
}

impl FransonConfig {
    pub fn total_phase(&self) -> f64 {
        if self.folded {
            2.0 * self.phase_alpha
        } else {
            self.phase_alpha + self.phase_beta
        }
    }

    pub fn validate(&self, source: &SourceModel) -> Result<()> {
        if !(self.umi_delay > source.correlation_fwhm) {
            return Err(Error::Config(format!(
                "interferometer delay {:e} s must exceed the correlation FWHM {:e} s",
                self.umi_delay, source.correlation_fwhm
            )));
        }
        if !(0.0..=1.0).contains(&self.intrinsic_visibility) {
            return Err(Error::Config("intrinsic_visibility must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Run controls shared by all simulators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunControls {
    pub event_cap: u64,
    /// Time segment given its own RNG streams, s.
    pub segment_duration: f64,
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            event_cap: DEFAULT_EVENT_CAP,
            segment_duration: 0.05,
        }
    }
}

/// Ground-truth tallies kept alongside a simulated stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthCounts {
    pub slots: u64,
    pub pairs: u64,
    /// Pairs with both photons detected, before dead-time pruning.
    pub detected_pairs: u64,
    pub noise_events: u64,
    pub dark_events: u64,
    pub dead_time_dropped: u64,
    pub out_of_range_dropped: u64,
}

impl TruthCounts {
    pub(crate) fn merge(&mut self, other: &TruthCounts) {
        self.slots += other.slots;
        self.pairs += other.pairs;
        self.detected_pairs += other.detected_pairs;
        self.noise_events += other.noise_events;
        self.dark_events += other.dark_events;
        self.dead_time_dropped += other.dead_time_dropped;
        self.out_of_range_dropped += other.out_of_range_dropped;
    }
}
