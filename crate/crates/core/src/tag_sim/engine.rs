//! Slot-based pair generator and detector pipeline shared by the experiments.
//!
//! Seed splitting: every random draw comes from a ChaCha8 generator keyed by
//! the user seed, with stream id `purpose << 48 | segment`. A segment spans a
//! whole number of coherence slots, so the output does not depend on how
//! segments are scheduled across threads.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal, Poisson};
use rayon::prelude::*;

use super::model::{DetectorModel, RunControls, SourceModel, TruthCounts};
use super::stream::TimeTagStream;
use crate::error::{Error, Result};
use crate::units::PS_PER_S;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum Purpose {
    Pairs = 1,
    Noise = 2,
    Dark = 3,
    Jitter = 4,
}

/// Generator for one (seed, segment, purpose[, channel]) combination.
fn stream_rng(seed: u64, segment: u64, purpose: Purpose, channel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | ((channel as u64) << 40) | segment);
    rng
}

pub(crate) struct ChannelPlan {
    pub id: u32,
    pub detector: DetectorModel,
    /// Noise photons/s arriving at this detector, before its efficiency.
    pub noise_rate: f64,
    /// Mean photons per pair arriving at this detector, used for the cap estimate.
    pub photons_per_pair: f64,
}

/// Up to two arrivals (channel index, time in ps) produced by one pair.
pub(crate) type Arrivals = [Option<(usize, f64)>; 2];

pub(crate) trait PairRouter: Sync {
    fn route(&self, rng: &mut ChaCha8Rng, t_signal: f64, t_idler: f64) -> Arrivals;
}

pub(crate) struct Engine<'a, R: PairRouter> {
    pub source: &'a SourceModel,
    pub pump_mw: f64,
    pub channels: Vec<ChannelPlan>,
    pub router: R,
    pub controls: RunControls,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub stream: TimeTagStream,
    pub truth: TruthCounts,
}

struct SlotSampler {
    mean: f64,
    modes: f64,
    zero_prob: f64,
    skip: Option<Geometric>,
}

impl SlotSampler {
    fn new(mean: f64, modes: u32) -> Self {
        let k = modes as f64;
        let zero_prob = if mean > 0.0 { (-k * (mean / k).ln_1p()).exp() } else { 1.0 };
        let skip = Geometric::new(1.0 - zero_prob).ok().filter(|_| zero_prob < 1.0);
        Self {
            mean,
            modes: k,
            zero_prob,
            skip,
        }
    }

    /// Pair count in a slot known to be non-empty: negative binomial with
    /// `K` modes and mean `mean`, truncated at zero, by inverse CDF.
    fn nonzero_count(&self, rng: &mut ChaCha8Rng) -> u64 {
        let m = self.mean / self.modes;
        let ratio = m / (1.0 + m);
        let target = rng.random::<f64>() * (1.0 - self.zero_prob);
        let mut pmf = self.zero_prob;
        let mut acc = 0.0;
        let mut n = 0u64;
        loop {
            n += 1;
            pmf *= (self.modes + n as f64 - 1.0) / n as f64 * ratio;
            acc += pmf;
            if acc >= target || pmf < 1e-300 || n > 1_000_000 {
                return n;
            }
        }
    }
}

impl<R: PairRouter> Engine<'_, R> {
    pub fn run(&self, duration: f64, seed: u64) -> Result<SimOutput> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::Domain(format!("duration must be positive, got {duration}")));
        }
        self.source.validate()?;
        for ch in &self.channels {
            ch.detector.validate()?;
        }
        if !(self.pump_mw >= 0.0) {
            return Err(Error::Domain("pump power must be >= 0".into()));
        }
        let pair_rate = self.source.emitted_pair_rate(self.pump_mw);
        let expected: f64 = self
            .channels
            .iter()
            .map(|c| duration * (pair_rate * c.photons_per_pair * c.detector.efficiency + c.noise_rate * c.detector.efficiency + c.detector.dark_rate))
            .sum();
        let cap = self.controls.event_cap;
        if expected > cap as f64 {
            return Err(Error::TooManyEvents {
                requested: expected as u64,
                cap,
            });
        }

        let duration_ps = (duration * PS_PER_S).round() as u64;
        let slot_ps = self.source.slot_width() * PS_PER_S;
        let total_slots = (duration_ps as f64 / slot_ps).ceil() as u64;
        let slots_per_segment = ((self.controls.segment_duration * PS_PER_S / slot_ps).round() as u64).max(1);
        let n_segments = total_slots.div_ceil(slots_per_segment).max(1);
        let sampler = SlotSampler::new(self.source.mean_pairs_per_slot(self.pump_mw), self.source.thermal_mode_count);

        let parts: Vec<(Vec<Vec<f64>>, TruthCounts)> = (0..n_segments)
            .into_par_iter()
            .map(|seg| {
                let first = seg * slots_per_segment;
                let last = ((seg + 1) * slots_per_segment).min(total_slots);
                self.segment(seg, first, last, slot_ps, duration_ps as f64, seed, &sampler)
            })
            .collect();

        let mut truth = TruthCounts {
            slots: total_slots,
            ..TruthCounts::default()
        };
        let mut channel_times: Vec<Vec<f64>> = vec![Vec::new(); self.channels.len()];
        for (times, t) in parts {
            truth.merge(&t);
            for (dst, src) in channel_times.iter_mut().zip(times) {
                dst.extend(src);
            }
        }

        let total: usize = channel_times.iter().map(Vec::len).sum();
        if total as u64 > cap {
            return Err(Error::TooManyEvents {
                requested: total as u64,
                cap,
            });
        }

        let finished: Vec<(u32, Vec<u64>, u64, u64)> = channel_times
            .into_par_iter()
            .zip(self.channels.par_iter())
            .map(|(mut times, plan)| {
                times.par_sort_unstable_by(f64::total_cmp);
                let before = times.len();
                let in_range: Vec<u64> = times
                    .into_iter()
                    .filter(|t| *t >= 0.0)
                    .map(|t| t.round() as u64)
                    .filter(|t| *t <= duration_ps)
                    .collect();
                let out_of_range = (before - in_range.len()) as u64;
                let dead_ps = (plan.detector.dead_time * PS_PER_S).round() as u64;
                let kept = apply_dead_time(&in_range, dead_ps);
                let dropped = (in_range.len() - kept.len()) as u64;
                (plan.id, kept, out_of_range, dropped)
            })
            .collect();

        let mut per_channel = BTreeMap::new();
        for (id, ts, out_of_range, dropped) in finished {
            truth.out_of_range_dropped += out_of_range;
            truth.dead_time_dropped += dropped;
            per_channel.entry(id).or_insert_with(Vec::new).extend(ts);
        }
        let stream = TimeTagStream::from_channels(per_channel, duration_ps, seed)?;
        Ok(SimOutput { stream, truth })
    }

    #[allow(clippy::too_many_arguments)]
    fn segment(
        &self,
        seg: u64,
        first_slot: u64,
        end_slot: u64,
        slot_ps: f64,
        duration_ps: f64,
        seed: u64,
        sampler: &SlotSampler,
    ) -> (Vec<Vec<f64>>, TruthCounts) {
        let mut truth = TruthCounts::default();
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); self.channels.len()];
        let seg_start = first_slot as f64 * slot_ps;
        let seg_end = (end_slot as f64 * slot_ps).min(duration_ps);

        if let Some(skip) = &sampler.skip {
            let mut rng = stream_rng(seed, seg, Purpose::Pairs, 0);
            let delay = Exp::new(1.0 / (self.source.correlation_fwhm * PS_PER_S / (2.0 * std::f64::consts::LN_2))).unwrap();
            let mut slot = first_slot;
            loop {
                slot = slot.saturating_add(skip.sample(&mut rng));
                if slot >= end_slot {
                    break;
                }
                let n = sampler.nonzero_count(&mut rng);
                for _ in 0..n {
                    let t_signal = (slot as f64 + rng.random::<f64>()) * slot_ps;
                    let d: f64 = delay.sample(&mut rng);
                    let t_idler = if rng.random::<bool>() { t_signal + d } else { t_signal - d };
                    let arrivals = self.router.route(&mut rng, t_signal, t_idler);
                    let mut detected = 0;
                    for (ch, t) in arrivals.into_iter().flatten() {
                        if rng.random::<f64>() < self.channels[ch].detector.efficiency {
                            out[ch].push(t);
                            detected += 1;
                        }
                    }
                    if detected == 2 {
                        truth.detected_pairs += 1;
                    }
                }
                truth.pairs += n;
                slot += 1;
            }
        }

        let span = (seg_end - seg_start).max(0.0);
        for (ci, plan) in self.channels.iter().enumerate() {
            let mut rng = stream_rng(seed, seg, Purpose::Noise, ci);
            let noise = poisson_times(&mut rng, plan.noise_rate * plan.detector.efficiency, seg_start, span);
            truth.noise_events += noise.len() as u64;
            out[ci].extend(noise);
            let mut rng = stream_rng(seed, seg, Purpose::Dark, ci);
            let darks = poisson_times(&mut rng, plan.detector.dark_rate, seg_start, span);
            truth.dark_events += darks.len() as u64;
            out[ci].extend(darks);

            let sigma = plan.detector.jitter_sigma * PS_PER_S;
            if sigma > 0.0 {
                let mut rng = stream_rng(seed, seg, Purpose::Jitter, ci);
                let normal = Normal::new(0.0, sigma).unwrap();
                for t in out[ci].iter_mut() {
                    *t += normal.sample(&mut rng);
                }
            }
        }
        (out, truth)
    }
}

/// Uniform Poisson arrivals at `rate_per_s` over `[start_ps, start_ps + span_ps)`.
fn poisson_times(rng: &mut ChaCha8Rng, rate_per_s: f64, start_ps: f64, span_ps: f64) -> Vec<f64> {
    let mean = rate_per_s * span_ps / PS_PER_S;
    if !(mean > 0.0) {
        return Vec::new();
    }
    let n = Poisson::new(mean).unwrap().sample(rng) as usize;
    (0..n).map(|_| start_ps + rng.random::<f64>() * span_ps).collect()
}

/// Non-paralyzable dead time on sorted timestamps: an event is kept only if it
/// arrives at least `dead_ps` after the last kept event.
pub fn apply_dead_time(sorted: &[u64], dead_ps: u64) -> Vec<u64> {
    if dead_ps == 0 {
        return sorted.to_vec();
    }
    let mut kept = Vec::with_capacity(sorted.len());
    let mut next_allowed = 0u64;
    for (i, &t) in sorted.iter().enumerate() {
        if i == 0 || t >= next_allowed {
            kept.push(t);
            next_allowed = t.saturating_add(dead_ps);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dead_time_is_non_paralyzable() {
        let kept = apply_dead_time(&[0, 10, 40, 49, 50, 120], 50);
        assert_eq!(kept, vec![0, 50, 120]);
        assert_eq!(apply_dead_time(&[1, 1, 2], 0), vec![1, 1, 2]);
    }

    #[test]
    fn streams_are_distinct() {
        let a: u64 = stream_rng(1, 0, Purpose::Pairs, 0).random();
        let b: u64 = stream_rng(1, 1, Purpose::Pairs, 0).random();
        let c: u64 = stream_rng(1, 0, Purpose::Noise, 0).random();
        let d: u64 = stream_rng(1, 0, Purpose::Pairs, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, d);
    }

    #[test]
    fn slot_counts_follow_negative_binomial() {
        // K = 1, mean 1: Bose-Einstein, P(n) = 2^-(n+1). Conditional on n >= 1 the
        // mean is 2 and the variance is 2.
        let s = SlotSampler::new(1.0, 1);
        assert!((s.zero_prob - 0.5).abs() < 1e-15);
        let mut rng = stream_rng(3, 0, Purpose::Pairs, 0);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| s.nonzero_count(&mut rng) as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
        assert!((var - 2.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn many_modes_approach_poisson() {
        let s = SlotSampler::new(0.5, 10_000);
        assert!((s.zero_prob - (-0.5f64).exp()).abs() < 1e-4);
    }
}
