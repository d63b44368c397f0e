//! Collection efficiencies from singles and coincidences, with Monte Carlo
//! errors, and the loss budget that turns a total efficiency into an escape
//! probability.
//!
//! ```bash
//! cargo run --release --example efficiency_inversion
//! ```

use ringsource::analysis::*;
use ringsource::tag_sim::*;

fn main() -> ringsource::Result<()> {
    let source = SourceModel {
        pair_rate_quadratic_coeff: 1.0e6,
        noise_rate_linear_coeff_signal: 1.0e6 / 9.0,
        noise_rate_linear_coeff_idler: 1.0e6 / 9.0,
        correlation_fwhm: 1.64e-9,
        thermal_mode_count: 1,
    };
    let det = |efficiency| DetectorModel {
        efficiency,
        dead_time: 0.0,
        ..DetectorModel::default()
    };
    let t = 1.0;
    let out = simulate_pair_source(&source, &det(0.2), &det(0.25), 1.0, t, 8)?;
    let hist = coincidence_histogram(&out.stream, SIGNAL_CHANNEL, IDLER_CHANNEL, 100e-12, 1.2e-6)?;
    let r = car_with(&hist, 20.0 * source.correlation_fwhm, 0.0, &[])?;
    let rates = EfficiencyInputs {
        singles_s: out.stream.rate(SIGNAL_CHANNEL),
        singles_i: out.stream.rate(IDLER_CHANNEL),
        coincidences: r.coincidences / t,
        accidentals: r.accidentals / t,
        noise_fraction_s: 0.1,
        noise_fraction_i: 0.1,
        dark_s: 100.0,
        dark_i: 100.0,
    };
    let est = collection_efficiency(&rates)?;
    let mc = monte_carlo_uncertainty(
        &EfficiencyCounts { integration_time: t, rates },
        |d| {
            let e = collection_efficiency(&d.rates)?;
            Ok(vec![e.eta_s, e.eta_i, e.n_c])
        },
        1000,
        2,
    )?;
    println!("eta_s = {:.4} ± {:.4} (set 0.2)", est.eta_s, mc.sigmas[0]);
    println!("eta_i = {:.4} ± {:.4} (set 0.25)", est.eta_i, mc.sigmas[1]);
    println!("pair rate at the chip {:.4e} ± {:.1e} /s (set 1e6)", est.n_c, mc.sigmas[2]);

    let budget = loss_budget(1.50, 2.55, 1.10, 0.75)?;
    println!("budget: 75% escape with 5.15 dB of loss -> {:.1}% total", 100.0 * budget.total_efficiency);
    let p = infer_emission_probability(0.229, 1.50, 2.55, 1.10)?;
    println!("inverse: 22.9% total -> {:.1}% escape", 100.0 * p);
    Ok(())
}
