use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::tag_sim::TimeTagStream;
use crate::units::PS_PER_S;

/// Start–stop delay histogram of `t_b − t_a`.
///
/// Bin `k` is centred on `k·bin_width` and covers `[k·w − w/2, k·w + w/2)`;
/// bins run from `−max_bin` to `+max_bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: u64,
    pub max_bin: u64,
    pub counts: Vec<u64>,
    pub total_a_counts: u64,
    pub total_b_counts: u64,
    pub duration_ps: u64,
}

impl CoincidenceHistogram {
    pub fn bin_width(&self) -> f64 {
        self.bin_width_ps as f64 / PS_PER_S
    }

    pub fn duration(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Bin-centre delay in ps for index `i` of `counts`.
    pub fn delay_ps(&self, i: usize) -> i64 {
        (i as i64 - self.max_bin as i64) * self.bin_width_ps as i64
    }

    /// Bin-centre delays in seconds.
    pub fn delays(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.delay_ps(i) as f64 / PS_PER_S).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the tallest bin (first one on ties).
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best
    }

    /// Full width at half maximum of the peak above `baseline` counts/bin,
    /// with linear interpolation between bins. Seconds.
    pub fn peak_fwhm(&self, baseline: f64) -> Option<f64> {
        let ip = self.peak_index();
        let peak = self.counts[ip] as f64 - baseline;
        if !(peak > 0.0) {
            return None;
        }
        let half = baseline + peak / 2.0;
        let level = |i: usize| self.counts[i] as f64;
        let mut left = None;
        for i in (0..ip).rev() {
            if level(i) <= half {
                let frac = (half - level(i)) / (level(i + 1) - level(i));
                left = Some(i as f64 + frac);
                break;
            }
        }
        let mut right = None;
        for i in ip + 1..self.counts.len() {
            if level(i) <= half {
                let frac = (level(i - 1) - half) / (level(i - 1) - level(i));
                right = Some((i - 1) as f64 + frac);
                break;
            }
        }
        Some((right? - left?) * self.bin_width())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["delay_ps", "counts"])?;
        for (i, c) in self.counts.iter().enumerate() {
            wtr.write_record([self.delay_ps(i).to_string(), c.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Histogram of `t_b − t_a` over `±span/2`, built by a linear merge. Large
/// inputs are split into chunks of `a` that are merged in parallel; integer
/// counts make the result independent of the split.
pub fn coincidence_histogram(stream: &TimeTagStream, ch_a: u32, ch_b: u32, bin_width: f64, span: f64) -> Result<CoincidenceHistogram> {
    let a = stream.channel(ch_a);
    let b = stream.channel(ch_b);
    histogram_from_timestamps(&a, &b, bin_width, span, stream.duration_ps())
}

pub fn histogram_from_timestamps(a: &[u64], b: &[u64], bin_width: f64, span: f64, duration_ps: u64) -> Result<CoincidenceHistogram> {
    let w = (bin_width * PS_PER_S).round();
    if !(w >= 1.0) {
        return domain(format!("bin width must be at least 1 ps, got {bin_width:e} s"));
    }
    if !(span >= bin_width) {
        return domain("histogram span must be at least one bin wide");
    }
    let w = w as i64;
    let max_bin = ((span * PS_PER_S / 2.0) / w as f64).floor() as i64;
    let n_bins = (2 * max_bin + 1) as usize;
    // delays d accepted when -(2M+1)w <= 2d < (2M+1)w
    let reach = (2 * max_bin + 1) * w;

    const CHUNK: usize = 1 << 16;
    let counts = a
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut counts = vec![0u64; n_bins];
            let first = chunk[0] as i64;
            let mut lo = b.partition_point(|&t| 2 * (t as i64 - first) < -reach);
            for &ta in chunk {
                let ta = ta as i64;
                while lo < b.len() && 2 * (b[lo] as i64 - ta) < -reach {
                    lo += 1;
                }
                let mut j = lo;
                while j < b.len() {
                    let d = b[j] as i64 - ta;
                    if 2 * d >= reach {
                        break;
                    }
                    let k = (2 * d + w).div_euclid(2 * w);
                    counts[(k + max_bin) as usize] += 1;
                    j += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut x, y| {
                for (xi, yi) in x.iter_mut().zip(y) {
                    *xi += yi;
                }
                x
            },
        );

    Ok(CoincidenceHistogram {
        bin_width_ps: w as u64,
        max_bin: max_bin as u64,
        counts,
        total_a_counts: a.len() as u64,
        total_b_counts: b.len() as u64,
        duration_ps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarResult {
    pub car: f64,
    pub car_sigma: f64,
    /// Raw counts inside the window.
    pub coincidences: f64,
    /// Expected accidental counts inside the window.
    pub accidentals: f64,
    /// `(C − A)/duration`, counts/s.
    pub true_rate: f64,
    /// `A/duration`, counts/s.
    pub accidental_rate: f64,
    pub window: f64,
    /// No off-peak counts were seen: `car` is a lower bound computed with one
    /// accidental count spread over the off-peak region.
    pub lower_bound: bool,
}

/// CAR with the window centred on the tallest bin.
pub fn car(hist: &CoincidenceHistogram, window: f64) -> Result<CarResult> {
    let centre = hist.delay_ps(hist.peak_index()) as f64 / PS_PER_S;
    car_with(hist, window, centre, &[])
}

/// CAR with an explicit window centre. The window takes bins whose centres lie
/// in `[centre − window/2, centre + window/2)`. Accidentals are averaged over bins
/// more than 5 windows from the centre and from every delay in `excluded`.
pub fn car_with(hist: &CoincidenceHistogram, window: f64, centre: f64, excluded: &[f64]) -> Result<CarResult> {
    if !(window >= hist.bin_width()) {
        return domain("coincidence window must be at least one bin wide");
    }
    let w_ps = (window * PS_PER_S).round();
    let c_ps = (centre * PS_PER_S).round();
    let mut coincidences = 0u64;
    let mut in_window = 0usize;
    let mut off_sum = 0u64;
    let mut off_bins = 0usize;
    for (i, &c) in hist.counts.iter().enumerate() {
        let d = hist.delay_ps(i) as f64;
        if 2.0 * (d - c_ps) >= -w_ps && 2.0 * (d - c_ps) < w_ps {
            coincidences += c;
            in_window += 1;
        } else if (d - c_ps).abs() > 5.0 * w_ps && excluded.iter().all(|e| (d - e * PS_PER_S).abs() > 5.0 * w_ps) {
            off_sum += c;
            off_bins += 1;
        }
    }
    if off_bins == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let scale = in_window as f64 / off_bins as f64;
    let lower_bound = off_sum == 0;
    let accidentals = if lower_bound { scale } else { off_sum as f64 * scale };
    let c = coincidences as f64;
    let car = c / accidentals;
    let rel_a = if lower_bound { 0.0 } else { 1.0 / (off_sum as f64).sqrt() };
    let rel_c = if coincidences > 0 { 1.0 / c.sqrt() } else { 0.0 };
    let duration = hist.duration();
    let reported_acc = if lower_bound { 0.0 } else { accidentals };
    Ok(CarResult {
        car,
        car_sigma: car * (rel_c * rel_c + rel_a * rel_a).sqrt(),
        coincidences: c,
        accidentals: reported_acc,
        true_rate: (c - reported_acc) / duration,
        accidental_rate: reported_acc / duration,
        window,
        lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: &[u64], b: &[u64], w: i64, max_bin: i64) -> Vec<u64> {
        let mut counts = vec![0u64; (2 * max_bin + 1) as usize];
        for &ta in a {
            for &tb in b {
                let d = tb as i64 - ta as i64;
                let k = (2 * d + w).div_euclid(2 * w);
                if k.abs() <= max_bin {
                    counts[(k + max_bin) as usize] += 1;
                }
            }
        }
        counts
    }

    #[test]
    fn identical_periodic_streams_fill_zero_bin() {
        let a: Vec<u64> = (0..1000).map(|i| i * 10_000).collect();
        let h = histogram_from_timestamps(&a, &a, 100e-12, 2e-9, 10_000_000).unwrap();
        assert_eq!(h.counts[h.max_bin as usize], 1000);
        assert_eq!(h.total(), 1000);
        assert_eq!(h.delays()[h.max_bin as usize], 0.0);
    }

    #[test]
    fn bin_edges_are_half_open() {
        // w = 100 ps: delay 50 belongs to bin +1, -50 to bin 0, -51 to bin -1
        let h = histogram_from_timestamps(&[1000], &[1050, 950, 949], 100e-12, 300e-12, 2000).unwrap();
        assert_eq!(h.max_bin, 1);
        assert_eq!(h.counts, vec![1, 1, 1]);
        let h = histogram_from_timestamps(&[1000], &[1150], 100e-12, 300e-12, 2000).unwrap();
        assert_eq!(h.total(), 0);
    }

    #[test]
    fn merge_matches_brute_force_with_odd_width() {
        let a: Vec<u64> = (0..300u64).map(|i| (i * 7919) % 100_000).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let b: Vec<u64> = (0..300u64).map(|i| (i * 104_729 + 13) % 100_000).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let h = histogram_from_timestamps(&a, &b, 333e-12, 20e-9, 100_000).unwrap();
        assert_eq!(h.counts, brute(&a, &b, 333, h.max_bin as i64));
    }

    #[test]
    fn empty_channel_gives_empty_histogram() {
        let h = histogram_from_timestamps(&[], &[5, 6], 1e-9, 10e-9, 100).unwrap();
        assert!(h.is_empty());
        assert_eq!(h.len(), 11);
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(histogram_from_timestamps(&[1], &[1], 0.0, 1e-9, 10).is_err());
        assert!(histogram_from_timestamps(&[1], &[1], 1e-9, 0.5e-9, 10).is_err());
    }

    fn synthetic(floor: u64, peak: u64) -> CoincidenceHistogram {
        let mut counts = vec![floor; 201];
        counts[100] += peak;
        CoincidenceHistogram {
            bin_width_ps: 100,
            max_bin: 100,
            counts,
            total_a_counts: 0,
            total_b_counts: 0,
            duration_ps: 1_000_000_000_000,
        }
    }

    #[test]
    fn flat_histogram_has_unit_car() {
        let r = car_with(&synthetic(400, 0), 300e-12, 0.0, &[]).unwrap();
        assert!((r.car - 1.0).abs() < 1e-12);
        assert_eq!(r.true_rate, 0.0);
    }

    #[test]
    fn window_doubling_halves_car() {
        let h = synthetic(10, 100_000);
        let r1 = car(&h, 100e-12).unwrap();
        assert_eq!(r1.coincidences, 100_010.0);
        // window 200 ps covers bins -1 and 0
        let r2 = car(&h, 200e-12).unwrap();
        assert_eq!(r2.coincidences, 100_020.0);
        assert!((r1.car / r2.car - 2.0).abs() < 1e-3);
    }

    #[test]
    fn zero_floor_reports_lower_bound() {
        let r = car(&synthetic(0, 50), 100e-12).unwrap();
        assert!(r.lower_bound);
        assert!(r.car.is_finite());
        assert_eq!(r.accidentals, 0.0);
    }

    #[test]
    fn excluded_regions_drop_out_of_background() {
        let mut h = synthetic(10, 1000);
        for i in 176..=184 {
            h.counts[i] = 500;
        }
        let plain = car_with(&h, 100e-12, 0.0, &[]).unwrap();
        let masked = car_with(&h, 100e-12, 0.0, &[8e-9]).unwrap();
        assert!((masked.accidentals - 10.0).abs() < 1e-12);
        assert!(plain.accidentals > masked.accidentals);
    }

    #[test]
    fn fwhm_of_triangle() {
        let counts: Vec<u64> = (0..21).map(|i: i64| (100 - 10 * (i - 10).abs()).max(0) as u64).collect();
        let h = CoincidenceHistogram {
            bin_width_ps: 1000,
            max_bin: 10,
            counts,
            total_a_counts: 0,
            total_b_counts: 0,
            duration_ps: 1,
        };
        assert!((h.peak_fwhm(0.0).unwrap() - 10e-9).abs() < 1e-15);
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        synthetic(1, 2).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("delay_ps,counts\n-10000,1\n"));
    }
}
