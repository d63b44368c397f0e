//! Unheralded g2(0) of one arm split on a beam splitter for an increasing
//! number of thermal modes, and the inferred effective mode number.
//!
//! ```bash
//! cargo run --release --example thermal_statistics
//! ```

use ringsource::analysis::{effective_mode_number, unheralded_g2};
use ringsource::tag_sim::*;

fn main() -> ringsource::Result<()> {
    let det = DetectorModel::ideal();
    println!("{:>3} {:>14} {:>8} {:>8}", "K", "g2(0)", "1+1/K", "K_eff");
    for k in [1u32, 2, 4, 8, 15] {
        let source = SourceModel {
            pair_rate_quadratic_coeff: 1.0,
            noise_rate_linear_coeff_signal: 0.0,
            noise_rate_linear_coeff_idler: 0.0,
            correlation_fwhm: 1e-9,
            thermal_mode_count: k,
        }
        .with_mean_pairs_per_slot(1.0, 1.0);
        let out = simulate_hbt(&source, &det, &det, &det, 0.5, 1.0, 0.005, k as u64)?;
        // bins well inside the coherence time
        let g = unheralded_g2(&out.stream, HBT_S1_CHANNEL, HBT_S2_CHANNEL, source.slot_width() / 20.0, &[0.0])?;
        let k_eff = effective_mode_number(g[0].g2).map_or("-".to_string(), |v| format!("{v:.2}"));
        println!("{k:>3} {:>7.4} ± {:.4} {:>8.4} {k_eff:>8}", g[0].g2, g[0].sigma, 1.0 + 1.0 / k as f64);
    }
    Ok(())
}
