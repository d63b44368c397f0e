//! ITU 100 GHz grid, energy-matched channel pairing around the pump, comb
//! synthesis from dispersion coefficients and the predicted joint spectral
//! intensity.
//!
//! Channel `n` sits at `190.0 THz + n·100 GHz`. A 200 GHz ring therefore
//! steps two channels per mode.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::units::{frequency_to_wavelength, wavelength_to_frequency};

pub const GRID_ANCHOR_HZ: f64 = 190.0e12;
pub const GRID_SPACING_HZ: f64 = 100.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItuChannel {
    pub index: i32,
    pub center_frequency: f64,
    pub center_wavelength: f64,
}

impl ItuChannel {
    fn at(index: i32) -> Self {
        let f = GRID_ANCHOR_HZ + index as f64 * GRID_SPACING_HZ;
        Self {
            index,
            center_frequency: f,
            center_wavelength: frequency_to_wavelength(f),
        }
    }

    pub fn label(&self) -> String {
        format!("C{}", self.index)
    }
}

/// The usable channel range. Defaults to C1–C72.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItuGrid {
    pub first: i32,
    pub last: i32,
}

impl Default for ItuGrid {
    fn default() -> Self {
        Self { first: 1, last: 72 }
    }
}

impl ItuGrid {
    pub fn contains(&self, index: i32) -> bool {
        (self.first..=self.last).contains(&index)
    }

    pub fn channel(&self, index: i32) -> Result<ItuChannel> {
        if !self.contains(index) {
            return domain(format!("channel C{index} outside C{}–C{}", self.first, self.last));
        }
        Ok(ItuChannel::at(index))
    }

    pub fn channel_to_wavelength(&self, index: i32) -> Result<f64> {
        Ok(self.channel(index)?.center_wavelength)
    }

    /// Nearest grid channel and the offset `f − f_channel` in Hz.
    pub fn wavelength_to_channel(&self, wavelength: f64) -> Result<(ItuChannel, f64)> {
        if !(wavelength > 0.0) {
            return domain(format!("wavelength must be positive, got {wavelength}"));
        }
        let f = wavelength_to_frequency(wavelength);
        let index = ((f - GRID_ANCHOR_HZ) / GRID_SPACING_HZ).round();
        if index < self.first as f64 - 0.5 || index > self.last as f64 + 0.5 {
            return domain(format!("{:.3} nm is outside the channel plan", wavelength * 1e9));
        }
        let ch = self.channel(index as i32)?;
        Ok((ch, f - ch.center_frequency))
    }

    /// Signal/idler channels at `pump ∓ step·order`.
    pub fn pair_channels(&self, pump_index: i32, order: i32, grid_step_channels: i32) -> Result<(ItuChannel, ItuChannel)> {
        if order < 1 || grid_step_channels < 1 {
            return domain("pair order and grid step must be >= 1");
        }
        let signal = self.channel(pump_index - grid_step_channels * order)?;
        let idler = self.channel(pump_index + grid_step_channels * order)?;
        Ok((signal, idler))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombLine {
    /// µ, zero at the pump.
    pub mode_index: i64,
    pub frequency: f64,
    pub itu_channel: Option<ItuChannel>,
    pub correlated: bool,
}

impl CombLine {
    pub fn is_pump(&self) -> bool {
        self.mode_index == 0
    }

    pub fn wavelength(&self) -> f64 {
        frequency_to_wavelength(self.frequency)
    }
}

/// Frequencies `ω_µ = ω0 + D1·µ + (D2/2)·µ²` for `µ ∈ [−half_count, half_count]`,
/// converted to Hz. Lines within a quarter grid spacing of an ITU channel in
/// `grid` are tagged with it.
pub fn synthesize_comb(omega0: f64, d1: f64, d2: f64, half_count: i64, grid: &ItuGrid) -> Result<Vec<CombLine>> {
    if half_count < 1 {
        return domain("half_count must be >= 1");
    }
    Ok((-half_count..=half_count)
        .map(|mu| {
            let m = mu as f64;
            let omega = omega0 + d1 * m + d2 / 2.0 * m * m;
            let frequency = omega / (2.0 * PI);
            let itu_channel = grid
                .wavelength_to_channel(frequency_to_wavelength(frequency))
                .ok()
                .filter(|(_, off)| off.abs() < GRID_SPACING_HZ / 4.0)
                .map(|(ch, _)| ch);
            CombLine {
                mode_index: mu,
                frequency,
                itu_channel,
                correlated: false,
            }
        })
        .collect())
}

/// Marks signal/idler lines `±µ` as correlated when the pair-attributed
/// (quadratic) count coefficient on *both* lines exceeds `sigmas` standard
/// errors. `fits` holds `(µ, a, σ_a)` per measured line.
pub fn classify_correlated(lines: &mut [CombLine], fits: &[(i64, f64, f64)], sigmas: f64) {
    let significant = |mu: i64| {
        fits.iter()
            .find(|(m, _, _)| *m == mu)
            .is_some_and(|&(_, a, s)| a > sigmas * s)
    };
    for line in lines.iter_mut() {
        let mu = line.mode_index;
        line.correlated = mu != 0 && significant(mu) && significant(-mu);
    }
}

pub fn write_comb_csv<W: Write>(lines: &[CombLine], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["mode_index", "frequency_hz", "wavelength_nm", "itu_channel", "correlated"])?;
    for l in lines {
        wtr.write_record([
            l.mode_index.to_string(),
            format!("{:.6}", l.frequency),
            format!("{:.6}", l.wavelength() * 1e9),
            l.itu_channel.map(|c| c.label()).unwrap_or_default(),
            l.correlated.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Row-signal, column-idler joint spectral intensity matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpectrum {
    pub signal_labels: Vec<String>,
    pub idler_labels: Vec<String>,
    pub weights: Vec<Vec<f64>>,
}

/// Predicted JSI: a cell is non-zero only when the signal of row `i` and the
/// idler of column `j` conserve energy with the pump they share
/// (`f_s + f_i = 2·f_p` within `tolerance_hz`). Weights are 1 unless
/// `brightness` supplies one per pair (e.g. the phase-matching factor).
pub fn predicted_jsi(
    pairs: &[(CombLine, CombLine)],
    pump_frequency: f64,
    tolerance_hz: f64,
    brightness: Option<&[f64]>,
) -> Result<JointSpectrum> {
    if let Some(b) = brightness {
        if b.len() != pairs.len() {
            return domain("brightness must supply one weight per pair");
        }
    }
    let label = |l: &CombLine| match l.itu_channel {
        Some(ch) => ch.label(),
        None => format!("mu{}", l.mode_index),
    };
    let weights = pairs
        .iter()
        .enumerate()
        .map(|(i, (signal, _))| {
            pairs
                .iter()
                .map(|(_, idler)| {
                    let mismatch = signal.frequency + idler.frequency - 2.0 * pump_frequency;
                    if mismatch.abs() <= tolerance_hz {
                        brightness.map_or(1.0, |b| b[i])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(JointSpectrum {
        signal_labels: pairs.iter().map(|(s, _)| label(s)).collect(),
        idler_labels: pairs.iter().map(|(_, i)| label(i)).collect(),
        weights,
    })
}

impl JointSpectrum {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<String> = std::iter::once("signal\\idler".to_string())
            .chain(self.idler_labels.iter().cloned())
            .collect();
        wtr.write_record(&header)?;
        for (label, row) in self.signal_labels.iter().zip(&self.weights) {
            let rec: Vec<String> = std::iter::once(label.clone()).chain(row.iter().map(|w| w.to_string())).collect();
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Comb line view of an ITU pair for JSI construction.
pub fn channel_line(ch: ItuChannel, mode_index: i64) -> CombLine {
    CombLine {
        mode_index,
        frequency: ch.center_frequency,
        itu_channel: Some(ch),
        correlated: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::wavelength_to_angular;

    #[test]
    fn pump_and_signal_channels() {
        let g = ItuGrid::default();
        assert!((g.channel_to_wavelength(46).unwrap() * 1e9 - 1540.56).abs() < 0.005);
        assert!((g.channel_to_wavelength(34).unwrap() * 1e9 - 1550.12).abs() < 0.005);
        assert!(g.channel_to_wavelength(0).is_err());
        assert!(g.channel_to_wavelength(73).is_err());
    }

    #[test]
    fn grid_round_trip_and_monotonic() {
        let g = ItuGrid::default();
        let mut last = f64::INFINITY;
        for n in g.first..=g.last {
            let w = g.channel_to_wavelength(n).unwrap();
            assert!(w < last);
            last = w;
            let (ch, off) = g.wavelength_to_channel(w).unwrap();
            assert_eq!(ch.index, n);
            assert!(off.abs() < 1.0);
        }
        let (ch, off) = g.wavelength_to_channel(1540.5e-9).unwrap();
        assert_eq!(ch.index, 46);
        assert!(off > 0.0);
        assert!(g.wavelength_to_channel(1300e-9).is_err());
    }

    #[test]
    fn listed_pairs() {
        let g = ItuGrid::default();
        let (s, i) = g.pair_channels(46, 1, 2).unwrap();
        assert_eq!((s.index, i.index), (44, 48));
        let (s, i) = g.pair_channels(46, 7, 2).unwrap();
        assert_eq!((s.index, i.index), (32, 60));
        for n in 1..=7 {
            let (s, i) = g.pair_channels(46, n, 2).unwrap();
            assert_eq!(s.index + i.index, 92);
        }
        assert!(g.pair_channels(46, 30, 2).is_err());
        assert!(g.pair_channels(46, 0, 2).is_err());
    }

    #[test]
    fn uniform_comb_when_dispersionless() {
        let d1 = 2.0 * PI * 200e9;
        let lines = synthesize_comb(wavelength_to_angular(1540.5e-9), d1, 0.0, 5, &ItuGrid::default()).unwrap();
        assert_eq!(lines.len(), 11);
        assert!(lines[5].is_pump());
        for w in lines.windows(2) {
            assert!(((w[1].frequency - w[0].frequency) / 200e9 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn anomalous_comb_fsr_grows_with_mode() {
        let lines = synthesize_comb(1.2e15, 1.2e12, 2.28e7, 20, &ItuGrid::default()).unwrap();
        let fsr: Vec<f64> = lines.windows(2).map(|w| w[1].frequency - w[0].frequency).collect();
        assert!(fsr.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn comb_of_87_lines_spans_measured_band() {
        // 87 resonances in total: µ ∈ [−43, 43].
        let lines = synthesize_comb(wavelength_to_angular(1540.5e-9), 2.0 * PI * 200e9, 0.0, 43, &ItuGrid::default()).unwrap();
        assert_eq!(lines.len(), 87);
        let span_nm = (lines[0].wavelength() - lines[86].wavelength()) * 1e9;
        assert!((span_nm - 140.0).abs() < 5.0, "{span_nm}");
    }

    #[test]
    fn comb_lines_snap_to_itu() {
        let omega0 = 2.0 * PI * 194.6e12;
        let lines = synthesize_comb(omega0, 2.0 * PI * 200e9, 0.0, 6, &ItuGrid::default()).unwrap();
        assert_eq!(lines[6].itu_channel.unwrap().index, 46);
        assert_eq!(lines[0].itu_channel.unwrap().index, 34);
    }

    fn listed_pair_lines(n: i32) -> Vec<(CombLine, CombLine)> {
        let g = ItuGrid::default();
        (1..=n)
            .map(|k| {
                let (s, i) = g.pair_channels(46, k, 2).unwrap();
                (channel_line(s, -(k as i64)), channel_line(i, k as i64))
            })
            .collect()
    }

    #[test]
    fn jsi_is_diagonal() {
        let pairs = listed_pair_lines(7);
        let pump = ItuChannel::at(46).center_frequency;
        let jsi = predicted_jsi(&pairs, pump, 1e6, None).unwrap();
        assert_eq!(jsi.weights.len(), 7);
        for (i, row) in jsi.weights.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                assert_eq!(*w, if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(predicted_jsi(&[], pump, 1e6, None).unwrap().weights.is_empty());
    }

    #[test]
    fn jsi_permutation_relabels() {
        let pairs = listed_pair_lines(5);
        let pump = ItuChannel::at(46).center_frequency;
        let b = [0.1, 0.2, 0.3, 0.4, 0.5];
        let jsi = predicted_jsi(&pairs, pump, 1e6, Some(&b)).unwrap();
        let perm = [3usize, 0, 4, 1, 2];
        let permuted: Vec<_> = perm.iter().map(|&k| pairs[k].clone()).collect();
        let pb: Vec<f64> = perm.iter().map(|&k| b[k]).collect();
        let jp = predicted_jsi(&permuted, pump, 1e6, Some(&pb)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(jp.weights[i][j], jsi.weights[perm[i]][perm[j]]);
            }
        }
    }

    #[test]
    fn correlated_classification_needs_both_sides() {
        let omega0 = 2.0 * PI * 194.6e12;
        let mut lines = synthesize_comb(omega0, 2.0 * PI * 200e9, 0.0, 3, &ItuGrid::default()).unwrap();
        let fits = [(-1, 100.0, 5.0), (1, 90.0, 5.0), (-2, 100.0, 5.0), (2, 3.0, 5.0)];
        classify_correlated(&mut lines, &fits, 3.0);
        let flags: Vec<bool> = lines.iter().map(|l| l.correlated).collect();
        assert_eq!(flags, vec![false, false, true, false, true, false, false]);
    }

    #[test]
    fn csv_exports() {
        let lines = synthesize_comb(2.0 * PI * 194.6e12, 2.0 * PI * 200e9, 0.0, 1, &ItuGrid::default()).unwrap();
        let mut buf = Vec::new();
        write_comb_csv(&lines, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mode_index,frequency_hz,wavelength_nm,itu_channel,correlated\n"));
        assert!(text.contains(",C46,"));
        let pump = ItuChannel::at(46).center_frequency;
        let jsi = predicted_jsi(&listed_pair_lines(2), pump, 1e6, None).unwrap();
        let mut buf = Vec::new();
        jsi.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "signal\\idler,C48,C50");
    }
}
