//! Monte Carlo time-tag generation for pair-source, HBT and Franson runs.

mod engine;
mod model;
mod stream;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use engine::{apply_dead_time, SimOutput};
pub use model::{
    correlation_fwhm_from_linewidth, DetectorModel, FransonConfig, RunControls, SourceModel, TruthCounts,
    DEFAULT_DEAD_TIME, DEFAULT_EVENT_CAP,
};
pub use stream::{TagRecord, TimeTagStream, FORMAT_VERSION, HEADER_LEN, MAGIC, RECORD_LEN};

use crate::error::{Error, Result};
use crate::units::PS_PER_S;
use engine::{Arrivals, ChannelPlan, Engine, PairRouter};

/// Channel ids of the two-detector layouts (pair source and Franson).
pub const SIGNAL_CHANNEL: u32 = 1;
pub const IDLER_CHANNEL: u32 = 2;

/// Channel ids of the heralded HBT layout.
pub const HERALD_CHANNEL: u32 = 1;
pub const HBT_S1_CHANNEL: u32 = 2;
pub const HBT_S2_CHANNEL: u32 = 3;

struct Direct;

impl PairRouter for Direct {
    fn route(&self, _rng: &mut ChaCha8Rng, t_signal: f64, t_idler: f64) -> Arrivals {
        [Some((0, t_signal)), Some((1, t_idler))]
    }
}

pub fn simulate_pair_source(
    source: &SourceModel,
    det_signal: &DetectorModel,
    det_idler: &DetectorModel,
    pump_mw: f64,
    duration: f64,
    seed: u64,
) -> Result<SimOutput> {
    simulate_pair_source_with(source, det_signal, det_idler, pump_mw, duration, seed, RunControls::default())
}

pub fn simulate_pair_source_with(
    source: &SourceModel,
    det_signal: &DetectorModel,
    det_idler: &DetectorModel,
    pump_mw: f64,
    duration: f64,
    seed: u64,
    controls: RunControls,
) -> Result<SimOutput> {
    let (noise_s, noise_i) = source.noise_rates(pump_mw);
    Engine {
        source,
        pump_mw,
        channels: vec![
            ChannelPlan {
                id: SIGNAL_CHANNEL,
                detector: *det_signal,
                noise_rate: noise_s,
                photons_per_pair: 1.0,
            },
            ChannelPlan {
                id: IDLER_CHANNEL,
                detector: *det_idler,
                noise_rate: noise_i,
                photons_per_pair: 1.0,
            },
        ],
        router: Direct,
        controls,
    }
    .run(duration, seed)
}

struct Splitter {
    ratio: f64,
}

impl PairRouter for Splitter {
    fn route(&self, rng: &mut ChaCha8Rng, t_signal: f64, t_idler: f64) -> Arrivals {
        let arm = if rng.random::<f64>() < self.ratio { 1 } else { 2 };
        [Some((0, t_idler)), Some((arm, t_signal))]
    }
}

/// Heralded HBT: the idler heralds, the signal meets a beam splitter that
/// sends it to s1 with probability `splitter_ratio`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_hbt(
    source: &SourceModel,
    det_idler: &DetectorModel,
    det_s1: &DetectorModel,
    det_s2: &DetectorModel,
    splitter_ratio: f64,
    pump_mw: f64,
    duration: f64,
    seed: u64,
) -> Result<SimOutput> {
    simulate_hbt_with(source, det_idler, det_s1, det_s2, splitter_ratio, pump_mw, duration, seed, RunControls::default())
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_hbt_with(
    source: &SourceModel,
    det_idler: &DetectorModel,
    det_s1: &DetectorModel,
    det_s2: &DetectorModel,
    splitter_ratio: f64,
    pump_mw: f64,
    duration: f64,
    seed: u64,
    controls: RunControls,
) -> Result<SimOutput> {
    if !(0.0..=1.0).contains(&splitter_ratio) {
        return Err(Error::Config(format!("splitter_ratio {splitter_ratio} outside [0, 1]")));
    }
    let (noise_s, noise_i) = source.noise_rates(pump_mw);
    Engine {
        source,
        pump_mw,
        channels: vec![
            ChannelPlan {
                id: HERALD_CHANNEL,
                detector: *det_idler,
                noise_rate: noise_i,
                photons_per_pair: 1.0,
            },
            ChannelPlan {
                id: HBT_S1_CHANNEL,
                detector: *det_s1,
                noise_rate: noise_s * splitter_ratio,
                photons_per_pair: splitter_ratio,
            },
            ChannelPlan {
                id: HBT_S2_CHANNEL,
                detector: *det_s2,
                noise_rate: noise_s * (1.0 - splitter_ratio),
                photons_per_pair: 1.0 - splitter_ratio,
            },
        ],
        router: Splitter { ratio: splitter_ratio },
        controls,
    }
    .run(duration, seed)
}

/// Unbalanced interferometers with one detector on the "+" output of each.
///
/// Each photon takes the long arm with probability ½. Same-arm pairs exit
/// correlated ports with probability `(1 + V·cos φ)/2`, mixed-arm pairs pick
/// ports independently. Only "+" exits reach the detectors, so singles are
/// half the arriving flux regardless of phase, the central peak carries
/// `(1 + V·cos φ)/8` of the pairs and each side peak `1/16`.
struct Franson {
    delay_ps: f64,
    correlated_prob: f64,
}

impl PairRouter for Franson {
    fn route(&self, rng: &mut ChaCha8Rng, t_signal: f64, t_idler: f64) -> Arrivals {
        let long_s = rng.random::<bool>();
        let long_i = rng.random::<bool>();
        let plus_s = rng.random::<bool>();
        let plus_i = if long_s == long_i {
            let correlated = rng.random::<f64>() < self.correlated_prob;
            plus_s == correlated
        } else {
            rng.random::<bool>()
        };
        let shift = |long: bool| if long { self.delay_ps } else { 0.0 };
        [
            plus_s.then(|| (0, t_signal + shift(long_s))),
            plus_i.then(|| (1, t_idler + shift(long_i))),
        ]
    }
}

pub fn simulate_franson(
    source: &SourceModel,
    config: &FransonConfig,
    det_signal: &DetectorModel,
    det_idler: &DetectorModel,
    pump_mw: f64,
    duration: f64,
    seed: u64,
) -> Result<SimOutput> {
    simulate_franson_with(source, config, det_signal, det_idler, pump_mw, duration, seed, RunControls::default())
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_franson_with(
    source: &SourceModel,
    config: &FransonConfig,
    det_signal: &DetectorModel,
    det_idler: &DetectorModel,
    pump_mw: f64,
    duration: f64,
    seed: u64,
    controls: RunControls,
) -> Result<SimOutput> {
    config.validate(source)?;
    let (noise_s, noise_i) = source.noise_rates(pump_mw);
    let v = config.intrinsic_visibility;
    Engine {
        source,
        pump_mw,
        channels: vec![
            ChannelPlan {
                id: SIGNAL_CHANNEL,
                detector: *det_signal,
                noise_rate: 0.5 * noise_s,
                photons_per_pair: 0.5,
            },
            ChannelPlan {
                id: IDLER_CHANNEL,
                detector: *det_idler,
                noise_rate: 0.5 * noise_i,
                photons_per_pair: 0.5,
            },
        ],
        router: Franson {
            delay_ps: config.umi_delay * PS_PER_S,
            correlated_prob: 0.5 * (1.0 + v * config.total_phase().cos()),
        },
        controls,
    }
    .run(duration, seed)
}
