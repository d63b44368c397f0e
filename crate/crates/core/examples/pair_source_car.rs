//! Simulated pair source at several pump powers: coincidence histogram, CAR,
//! and the quadratic-plus-linear fit of the singles rate.
//!
//! ```bash
//! cargo run --release --example pair_source_car
//! ```

use ringsource::analysis::{car, coincidence_histogram, fit_power_quadratic};
use ringsource::tag_sim::*;

fn main() -> ringsource::Result<()> {
    let source = SourceModel {
        pair_rate_quadratic_coeff: 1.0e5,
        noise_rate_linear_coeff_signal: 2.0e4,
        noise_rate_linear_coeff_idler: 2.0e4,
        correlation_fwhm: 1.64e-9,
        thermal_mode_count: 1,
    };
    let det = DetectorModel {
        efficiency: 0.2,
        ..DetectorModel::default()
    };
    let mut singles = Vec::new();
    println!("{:>5} {:>10} {:>10} {:>12} {:>9}", "P mW", "singles/s", "cc/s", "CAR", "FWHM ns");
    for (k, p) in [0.5, 1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
        let out = simulate_pair_source(&source, &det, &det, p, 2.0, k as u64)?;
        let hist = coincidence_histogram(&out.stream, SIGNAL_CHANNEL, IDLER_CHANNEL, 100e-12, 400e-9)?;
        let r = car(&hist, 1.6e-9)?;
        let fwhm = hist.peak_fwhm(r.accidentals / (r.window / hist.bin_width())).unwrap_or(f64::NAN);
        let s = out.stream.rate(SIGNAL_CHANNEL);
        singles.push((p, s - det.dark_rate));
        println!(
            "{p:>5.1} {s:>10.0} {:>10.0} {:>7.0} ± {:<4.0} {:>9.2}",
            r.true_rate / out.stream.duration(),
            r.car,
            r.car_sigma,
            fwhm * 1e9
        );
    }
    let fit = fit_power_quadratic(&singles)?;
    println!(
        "singles = a P^2 + b P: a = {:.0} ± {:.0}, b = {:.0} ± {:.0}; noise share at 1 mW {:.1}%",
        fit.a,
        fit.a_sigma(),
        fit.b,
        fit.b_sigma(),
        100.0 * fit.noise_fraction(1.0)
    );
    Ok(())
}
